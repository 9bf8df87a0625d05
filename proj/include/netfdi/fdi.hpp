#pragma once

#include <optional>
#include <vector>

#include "netfdi/estimator.hpp"
#include "netfdi/gain_design.hpp"

namespace netfdi {

/// Residual detection thresholds derived from the steady-state error
/// covariance bound Phi = (a1 N ||Q|| + a2 beta ||R||) / (N (1 - b^2)).
struct ThresholdSet {
    double b = 0.0;       // ||Ahat||_2, must be < 1
    double alpha1 = 0.0;  // ||I - K D_C||_2^2
    double alpha2 = 0.0;  // ||K||_2^2
    double beta = 0.0;    // ||Rbar||_2 / ||R||_2
    double c = 0.0;       // max_i |c_i|
    double q_norm = 0.0;  // ||Q||_2
    double r_norm = 0.0;  // ||R||_2 (max sensor noise variance)
    double phi = 0.0;     // per-sensor error-variance bound
    double t68 = 0.0;     // c*phi + R
    double t95 = 0.0;     // 2c*phi + 2R
    double t99 = 0.0;     // 3c*phi + 3R

    double level(int percent) const;  // 68, 95 or 99
};

struct ThresholdUnavailable {
    double b;
};

enum class FaultLevel { Healthy = 0, L68 = 68, L95 = 95, L99 = 99 };

struct SensorVerdict {
    FaultLevel level = FaultLevel::Healthy;
    std::optional<int> first_crossing_68, first_crossing_95, first_crossing_99;
};

struct FdiReport {
    std::vector<std::vector<double>> residuals;  // [step][sensor]
    std::vector<SensorVerdict> verdicts;
    std::vector<int> isolated;  // sensors flagged at the decision level
    int decision_level = 95;
    int burn_in = 0;
    int persistence = 1;
};

double residual(double y_i, const Vector& posterior, int measured_state, double gain);

/// Throws ThresholdUnavailable when b >= 1 (the bound derivation collapses).
ThresholdSet compute_thresholds(const GainResult& gain, const MeasurementModel& mm,
                                const Matrix& Q);

/// Empirical per-sensor error variance (post burn-in) against phi.
bool steady_state_covariance_bound_check(const std::vector<ErrorTrace>& traces,
                                         const ThresholdSet& thresholds, int burn_in,
                                         int state_dim);

FdiReport detect_and_isolate(const std::vector<std::vector<double>>& residuals,
                             const ThresholdSet& thresholds, int burn_in,
                             int persistence = 1, int decision_level = 95);

}  // namespace netfdi
