#pragma once

#include <optional>
#include <string>
#include <vector>

#include "netfdi/digraph.hpp"
#include "netfdi/estimator.hpp"
#include "netfdi/fdi.hpp"
#include "netfdi/gain_design.hpp"
#include "netfdi/observability.hpp"
#include "netfdi/sensor_network.hpp"
#include "netfdi/system_model.hpp"

namespace netfdi {

/// End-to-end scenario description. Indices in the config document are
/// 1-based (matching how instances are usually written down); they are
/// converted on parse.
struct ScenarioConfig {
    std::string pattern_file;
    std::string pattern_text;  // inline alternative to pattern_file
    double target_rho = 1.2;
    double process_variance = 0.04;
    WeightRule a_rule = WeightRule::UniformSigned;
    std::vector<SensorRecord> sensors;              // 0-based internally
    std::vector<std::pair<int, int>> network_edges; // 0-based internally
    ConsensusWeightRule w_rule = ConsensusWeightRule::SeededRandom;
    int horizon = 100;
    uint64_t seed = 1;
    FaultProfile faults;
    int burn_in = 10;
    int persistence = 1;
    int decision_level = 95;
    bool recovery = true;
    int recovery_horizon = 500;
    int fallback_budget = 4000;

    std::string serialize() const;                      // JSON document
    static ScenarioConfig parse(const std::string& text);
    static ScenarioConfig load(const std::string& path);
    bool operator==(const ScenarioConfig&) const = default;

    StructuredMatrix pattern() const;
    void validate() const;
};

struct RecoveryAction {
    int sensor = 0;
    ReplacementKind kind = ReplacementKind::ReplaceWith;
    std::optional<int> replacement_state;  // for ReplaceWith
    std::vector<std::pair<int, int>> added_edges;  // SC repair after removal
};

struct RecoveryOutcome {
    MeasurementModel mm;
    SensorNetwork net;
    std::vector<RecoveryAction> actions;
    std::vector<int> unrecoverable;  // sensors on singleton parent SCCs
    // maps new sensor index -> original sensor index (for estimate carry-over)
    std::vector<int> origin;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct ScenarioReport {
    ScenarioConfig config;
    SystemModel system;
    MeasurementModel mm;
    SensorNetwork net;
    SccDecomposition scc;
    ObservabilityReport classical_obs;
    ObservabilityReport networked_obs;
    GainResult gain;
    std::optional<ThresholdSet> thresholds;
    FilterRun run;
    FdiReport fdi;
    // recovery phase (present when recovery ran)
    std::optional<RecoveryOutcome> recovery;
    std::optional<ObservabilityReport> post_recovery_obs;
    std::optional<GainResult> post_recovery_gain;
    std::optional<FilterRun> continuation;
    std::vector<StageTiming> timings;
};

struct StageError {
    std::string stage;
    std::string message;
};

ScenarioReport run_scenario(const ScenarioConfig& config);

/// Observability + gain design only (the `check` verb).
ScenarioReport check_scenario(const ScenarioConfig& config);

RecoveryOutcome recover(const std::vector<int>& isolated, const SccDecomposition& dec,
                        const MeasurementModel& mm, const SensorNetwork& net,
                        ConsensusWeightRule rule, uint64_t seed);

/// Writes residuals.csv, msee.csv, verdicts.json and manifest.json;
/// returns the paths written.
std::vector<std::string> emit_reports(const ScenarioReport& report,
                                      const std::string& output_dir);

}  // namespace netfdi
