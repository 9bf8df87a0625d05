#include "netfdi/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "netfdi/montecarlo.hpp"

namespace netfdi {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

json pattern_to_json(const StructuredMatrix& p) {
    json rows = json::array();
    for (int i = 0; i < p.n; ++i) {
        std::string row;
        for (int j = 0; j < p.n; ++j) row.push_back(p.at(i, j) ? '*' : '0');
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

StructuredMatrix ScenarioConfig::pattern() const {
    if (!pattern_text.empty()) return StructuredMatrix::parse(pattern_text);
    return StructuredMatrix::load(pattern_file);
}

void ScenarioConfig::validate() const {
    if (pattern_file.empty() && pattern_text.empty())
        throw StageError{"config", "no pattern given"};
    const StructuredMatrix p = pattern();
    for (const auto& s : sensors) {
        if (s.measured_state < 0 || s.measured_state >= p.n)
            throw StageError{"config", "sensor measures out-of-range state"};
        if (s.gain == 0.0) throw StageError{"config", "sensor gain must be nonzero"};
        if (s.noise_variance <= 0.0)
            throw StageError{"config", "sensor noise variance must be positive"};
    }
    const int N = static_cast<int>(sensors.size());
    for (const auto& [a, b] : network_edges)
        if (a < 0 || a >= N || b < 0 || b >= N)
            throw StageError{"config", "network edge endpoint out of range"};
    for (const auto& iv : faults.intervals)
        if (iv.sensor < 0 || iv.sensor >= N)
            throw StageError{"config", "fault references unknown sensor"};
    if (horizon <= burn_in) throw StageError{"config", "horizon must exceed burn_in"};
}

std::string ScenarioConfig::serialize() const {
    json j;
    if (!pattern_file.empty()) j["pattern_file"] = pattern_file;
    if (!pattern_text.empty()) j["pattern"] = pattern_to_json(StructuredMatrix::parse(pattern_text));
    j["target_rho"] = target_rho;
    j["process_variance"] = process_variance;
    j["a_rule"] = a_rule == WeightRule::LogUniformSigned ? "log_uniform"
                  : a_rule == WeightRule::ConstantOne    ? "constant"
                                                         : "uniform";
    json sensors_j = json::array();
    for (const auto& s : sensors)
        sensors_j.push_back({{"state", s.measured_state + 1},
                             {"gain", s.gain},
                             {"noise_variance", s.noise_variance}});
    j["sensors"] = sensors_j;
    json edges_j = json::array();
    for (const auto& [a, b] : network_edges) edges_j.push_back({a + 1, b + 1});
    j["network_edges"] = edges_j;
    j["w_rule"] = (w_rule == ConsensusWeightRule::Uniform) ? "uniform" : "random";
    j["horizon"] = horizon;
    j["seed"] = seed;
    json faults_j = json::array();
    for (const auto& iv : faults.intervals) {
        json f{{"sensor", iv.sensor + 1}, {"onset", iv.onset}, {"bias", iv.bias}};
        if (iv.offset) f["offset"] = *iv.offset;
        faults_j.push_back(f);
    }
    j["faults"] = faults_j;
    j["burn_in"] = burn_in;
    j["persistence"] = persistence;
    j["decision_level"] = decision_level;
    j["recovery"] = recovery;
    j["recovery_horizon"] = recovery_horizon;
    j["fallback_budget"] = fallback_budget;
    return j.dump(2);
}

ScenarioConfig ScenarioConfig::parse(const std::string& text) {
    json j = json::parse(text);
    ScenarioConfig c;
    c.pattern_file = j.value("pattern_file", "");
    if (j.contains("pattern")) {
        std::string joined;
        for (const auto& row : j.at("pattern")) joined += row.get<std::string>() + "\n";
        c.pattern_text = joined;
    }
    c.target_rho = j.value("target_rho", 1.2);
    c.process_variance = j.value("process_variance", 0.04);
    const std::string rule = j.value("a_rule", "uniform");
    if (rule == "log_uniform")
        c.a_rule = WeightRule::LogUniformSigned;
    else if (rule == "constant")
        c.a_rule = WeightRule::ConstantOne;
    else if (rule == "uniform")
        c.a_rule = WeightRule::UniformSigned;
    else
        throw StageError{"config", "unknown a_rule: " + rule};
    for (const auto& s : j.at("sensors")) {
        SensorRecord rec;
        rec.measured_state = s.at("state").get<int>() - 1;
        rec.gain = s.value("gain", 1.0);
        rec.noise_variance = s.value("noise_variance", 0.04);
        c.sensors.push_back(rec);
    }
    for (const auto& e : j.value("network_edges", json::array()))
        c.network_edges.emplace_back(e.at(0).get<int>() - 1, e.at(1).get<int>() - 1);
    c.w_rule = (j.value("w_rule", "random") == "uniform") ? ConsensusWeightRule::Uniform
                                                          : ConsensusWeightRule::SeededRandom;
    c.horizon = j.value("horizon", 100);
    c.seed = j.value("seed", 1ull);
    for (const auto& f : j.value("faults", json::array())) {
        FaultInterval iv;
        iv.sensor = f.at("sensor").get<int>() - 1;
        iv.onset = f.at("onset").get<int>();
        if (f.contains("offset")) iv.offset = f.at("offset").get<int>();
        iv.bias = f.at("bias").get<double>();
        c.faults.intervals.push_back(iv);
    }
    c.burn_in = j.value("burn_in", 10);
    c.persistence = j.value("persistence", 1);
    c.decision_level = j.value("decision_level", 95);
    c.recovery = j.value("recovery", true);
    c.recovery_horizon = j.value("recovery_horizon", 500);
    c.fallback_budget = j.value("fallback_budget", 4000);
    return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StageError{"config", "cannot open config file: " + path};
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

RecoveryOutcome recover(const std::vector<int>& isolated, const SccDecomposition& dec,
                        const MeasurementModel& mm, const SensorNetwork& net,
                        ConsensusWeightRule rule, uint64_t seed) {
    if (isolated.empty()) throw StageError{"recover", "isolated set is empty"};

    RecoveryOutcome out;
    out.mm = mm;
    std::vector<bool> remove(mm.count(), false);

    for (int sensor : isolated) {
        const ReplacementVerdict v = replacement_candidates(dec, out.mm, sensor);
        RecoveryAction action;
        action.sensor = sensor;
        action.kind = v.kind;
        switch (v.kind) {
            case ReplacementKind::ReplaceWith:
                // lowest-index equivalent state; the new sensor inherits the
                // faulty sensor's communication links
                action.replacement_state = v.candidates.front();
                out.mm.sensors[sensor].measured_state = v.candidates.front();
                break;
            case ReplacementKind::RemovalSafe:
                remove[sensor] = true;
                break;
            case ReplacementKind::Irreplaceable:
                out.unrecoverable.push_back(sensor);
                break;
        }
        out.actions.push_back(action);
    }

    // drop RemovalSafe sensors, remap the network, repair strong connectivity
    std::vector<int> new_index(mm.count(), -1);
    MeasurementModel pruned;
    pruned.n = mm.n;
    for (int i = 0; i < mm.count(); ++i) {
        if (remove[i]) continue;
        new_index[i] = pruned.count();
        pruned.sensors.push_back(out.mm.sensors[i]);
        out.origin.push_back(i);
    }
    out.mm = pruned;

    std::vector<std::pair<int, int>> edges;
    for (const auto& [a, b] : net.edges)
        if (new_index[a] >= 0 && new_index[b] >= 0)
            edges.emplace_back(new_index[a], new_index[b]);

    std::vector<std::pair<int, int>> added;
    if (!is_strongly_connected(out.mm.count(), edges))
        added = repair_strong_connectivity(out.mm.count(), edges);
    for (auto& action : out.actions)
        if (action.kind == ReplacementKind::RemovalSafe) action.added_edges = added;

    out.net = build_row_stochastic(out.mm.count(), edges, rule, seed);
    return out;
}

namespace {

struct StageClock {
    std::vector<StageTiming>& timings;
    std::string stage;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    ~StageClock() {
        timings.push_back(
            {stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count()});
    }
};

ScenarioReport run_pipeline(const ScenarioConfig& config, bool full) {
    config.validate();
    ScenarioReport rep;
    rep.config = config;

    const StructuredMatrix pattern = config.pattern();
    {
        StageClock clock{rep.timings, "realize"};
        try {
            // the digraph convention draws edge i -> j for a coupling that
            // carries x_i into x_j's update, so the plant matrix lives on
            // the transposed support (measuring one state per parent SCC
            // is then exactly the observability condition)
            rep.system = realize_system(pattern.transposed(), config.a_rule,
                                        config.target_rho, config.seed,
                                        config.process_variance);
        } catch (const std::exception& e) {
            throw StageError{"realize", e.what()};
        }
    }

    rep.mm.n = pattern.n;
    rep.mm.sensors = config.sensors;

    {
        StageClock clock{rep.timings, "graph"};
        rep.scc = scc_decompose(build_digraph(pattern));
        rep.net = build_row_stochastic(static_cast<int>(config.sensors.size()),
                                       config.network_edges, config.w_rule, config.seed);
    }
    {
        StageClock clock{rep.timings, "observability"};
        rep.classical_obs = is_observable(rep.system.A, rep.mm.dense_C());
        rep.networked_obs = networked_observability(rep.net, rep.system, rep.mm);
        if (!rep.networked_obs.observable)
            throw StageError{"observability", "pair (W(x)A, D_C) is not observable"};
    }
    {
        StageClock clock{rep.timings, "gain_design"};
        const auto problem = GainDesignProblem::make(rep.net, rep.system, rep.mm);
        rep.gain = design_gain(problem, config.fallback_budget, config.seed);
        if (!rep.gain.success)
            throw StageError{"gain_design",
                             "no stabilizing gain found (LMI and fallback both failed)"};
    }
    {
        StageClock clock{rep.timings, "thresholds"};
        try {
            rep.thresholds = compute_thresholds(rep.gain, rep.mm, rep.system.Q);
        } catch (const ThresholdUnavailable& t) {
            throw StageError{"thresholds",
                             "spectral norm b = " + fmt(t.b) + " >= 1, bound unavailable"};
        }
    }
    if (!full) return rep;

    {
        StageClock clock{rep.timings, "simulate"};
        rep.run = run_filter(rep.system, rep.mm, rep.net, rep.gain.gain_columns,
                             config.faults, config.horizon, config.seed);
    }
    {
        StageClock clock{rep.timings, "fdi"};
        rep.fdi = detect_and_isolate(rep.run.residuals, *rep.thresholds, config.burn_in,
                                     config.persistence, config.decision_level);
    }

    if (config.recovery && !rep.fdi.isolated.empty()) {
        StageClock clock{rep.timings, "recovery"};
        rep.recovery = recover(rep.fdi.isolated, rep.scc, rep.mm, rep.net,
                               config.w_rule, config.seed);
        rep.post_recovery_obs =
            networked_observability(rep.recovery->net, rep.system, rep.recovery->mm);

        const auto problem =
            GainDesignProblem::make(rep.recovery->net, rep.system, rep.recovery->mm);
        rep.post_recovery_gain =
            design_gain(problem, config.fallback_budget, config.seed + 1);
        if (!rep.post_recovery_gain->success)
            throw StageError{"recovery", "post-recovery gain design failed"};

        // continue estimating through the swap: carried-over posteriors for
        // surviving sensors, neighbor average for replaced ones
        std::set<int> replaced;
        for (const auto& a : rep.recovery->actions)
            if (a.kind == ReplacementKind::ReplaceWith) replaced.insert(a.sensor);

        const int N2 = rep.recovery->mm.count();
        std::vector<Vector> init(N2);
        for (int j = 0; j < N2; ++j)
            init[j] = rep.run.final_state.posterior[rep.recovery->origin[j]];
        for (int j = 0; j < N2; ++j) {
            if (!replaced.count(rep.recovery->origin[j])) continue;
            Vector avg = Vector::Zero(rep.system.n());
            int cnt = 0;
            for (int nb : rep.recovery->net.in_neighborhood(j)) {
                if (nb == j) continue;
                avg += init[nb];
                ++cnt;
            }
            if (cnt > 0) init[j] = avg / cnt;
        }

        SystemModel cont = rep.system;
        cont.x0 = rep.run.states.back();
        rep.continuation = run_filter(cont, rep.recovery->mm, rep.recovery->net,
                                      rep.post_recovery_gain->gain_columns, FaultProfile{},
                                      config.recovery_horizon,
                                      replication_seed(config.seed, 0x5eed), &init);
    }
    return rep;
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& config) {
    return run_pipeline(config, /*full=*/true);
}

ScenarioReport check_scenario(const ScenarioConfig& config) {
    return run_pipeline(config, /*full=*/false);
}

namespace {

json observability_json(const ObservabilityReport& r) {
    return {{"dimension", r.dimension},
            {"rank", r.rank},
            {"observable", r.observable},
            {"smallest_retained_sv", r.smallest_retained_sv},
            {"network_strongly_connected", r.network_strongly_connected}};
}

json gain_json(const GainResult& g) {
    json j;
    j["method"] = g.method == GainMethod::Lmi ? "lmi" : "fallback";
    j["success"] = g.success;
    j["rho"] = g.rho;
    j["b"] = g.spectral_norm;
    j["trace_history"] = g.trace_history;
    j["sensor_feedthrough"] = g.sensor_feedthrough;
    json K = json::array();
    for (Eigen::Index i = 0; i < g.K.rows(); ++i)
        for (Eigen::Index c = 0; c < g.K.cols(); ++c)
            if (g.K(i, c) != 0.0) K.push_back({i, c, g.K(i, c)});
    j["K_nonzeros"] = K;
    return j;
}

const char* level_name(FaultLevel l) {
    switch (l) {
        case FaultLevel::L99: return "faulty_99";
        case FaultLevel::L95: return "faulty_95";
        case FaultLevel::L68: return "faulty_68";
        default: return "healthy";
    }
}

json verdicts_json(const FdiReport& fdi) {
    json j;
    json sensors = json::array();
    for (size_t i = 0; i < fdi.verdicts.size(); ++i) {
        const auto& v = fdi.verdicts[i];
        json s{{"sensor", i + 1}, {"level", level_name(v.level)}};
        if (v.first_crossing_68) s["first_crossing_68"] = *v.first_crossing_68;
        if (v.first_crossing_95) s["first_crossing_95"] = *v.first_crossing_95;
        if (v.first_crossing_99) s["first_crossing_99"] = *v.first_crossing_99;
        s["isolated"] = std::find(fdi.isolated.begin(), fdi.isolated.end(),
                                  static_cast<int>(i)) != fdi.isolated.end();
        sensors.push_back(s);
    }
    j["sensors"] = sensors;
    json iso = json::array();
    for (int i : fdi.isolated) iso.push_back(i + 1);
    j["isolated"] = iso;
    j["decision_level"] = fdi.decision_level;
    j["burn_in"] = fdi.burn_in;
    j["persistence"] = fdi.persistence;
    return j;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError{"emit", "cannot write " + path};
    out << content;
}

std::string residual_csv(const FilterRun& run) {
    std::string csv = "k,sensor,residual,squared_error,msee\n";
    for (size_t k = 0; k < run.residuals.size(); ++k) {
        const int step = static_cast<int>(k) + 1;
        for (size_t i = 0; i < run.residuals[k].size(); ++i) {
            csv += std::to_string(step) + "," + std::to_string(i + 1) + "," +
                   fmt(run.residuals[k][i]) + "," +
                   fmt(run.errors.squared_error[step][i]) + "," +
                   fmt(run.errors.msee[step]) + "\n";
        }
    }
    return csv;
}

std::string msee_csv(const FilterRun& run) {
    std::string csv = "k,msee\n";
    for (size_t k = 0; k < run.errors.msee.size(); ++k)
        csv += std::to_string(k) + "," + fmt(run.errors.msee[k]) + "\n";
    return csv;
}

}  // namespace

std::vector<std::string> emit_reports(const ScenarioReport& report,
                                      const std::string& output_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(output_dir);
    std::vector<std::string> files;
    auto emit = [&](const std::string& name, const std::string& content) {
        const std::string path = (fs::path(output_dir) / name).string();
        write_file(path, content);
        files.push_back(path);
    };

    emit("residuals.csv", residual_csv(report.run));
    emit("msee.csv", msee_csv(report.run));
    emit("verdicts.json", verdicts_json(report.fdi).dump(2) + "\n");
    if (report.continuation) {
        emit("continuation_residuals.csv", residual_csv(*report.continuation));
        emit("continuation_msee.csv", msee_csv(*report.continuation));
    }

    const std::string config_text = report.config.serialize();
    json manifest;
    manifest["config"] = json::parse(config_text);
    manifest["config_hash"] = fnv1a(config_text);
    manifest["seed"] = report.config.seed;
    manifest["replacement_estimate_init"] = "neighbor_average";
    manifest["observability"] = {{"classical", observability_json(report.classical_obs)},
                                 {"networked", observability_json(report.networked_obs)}};
    manifest["gain"] = gain_json(report.gain);
    if (report.thresholds) {
        const auto& t = *report.thresholds;
        manifest["thresholds"] = {{"b", t.b},     {"alpha1", t.alpha1}, {"alpha2", t.alpha2},
                                  {"beta", t.beta}, {"c", t.c},         {"phi", t.phi},
                                  {"t68", t.t68}, {"t95", t.t95},       {"t99", t.t99}};
    }
    json sccs = json::array();
    for (const auto& s : report.scc.sccs) {
        json nodes = json::array();
        for (int v : s) nodes.push_back(v + 1);
        sccs.push_back(nodes);
    }
    json parents = json::array();
    for (int p : report.scc.parent_indices()) parents.push_back(p);
    json cond = json::array();
    for (const auto& [a, b] : report.scc.condensation_edges) cond.push_back({a, b});
    manifest["scc"] = {{"sccs", sccs}, {"parents", parents}, {"condensation_edges", cond}};
    if (report.recovery) {
        json actions = json::array();
        for (const auto& a : report.recovery->actions) {
            json aj{{"sensor", a.sensor + 1}};
            switch (a.kind) {
                case ReplacementKind::ReplaceWith:
                    aj["action"] = "replace";
                    aj["replacement_state"] = *a.replacement_state + 1;
                    break;
                case ReplacementKind::RemovalSafe:
                    aj["action"] = "remove";
                    break;
                case ReplacementKind::Irreplaceable:
                    aj["action"] = "unrecoverable";
                    break;
            }
            actions.push_back(aj);
        }
        manifest["recovery"] = {
            {"actions", actions},
            {"post_observability", observability_json(*report.post_recovery_obs)},
            {"post_gain", gain_json(*report.post_recovery_gain)}};
    }
    json timing = json::array();
    for (const auto& t : report.timings) timing.push_back({{t.stage, t.seconds}});
    manifest["timings"] = timing;
    json file_list = json::array();
    for (const auto& f : files) file_list.push_back(fs::path(f).filename().string());
    manifest["files"] = file_list;
    emit("manifest.json", manifest.dump(2) + "\n");
    return files;
}

}  // namespace netfdi
