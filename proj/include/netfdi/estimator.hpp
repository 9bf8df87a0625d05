#pragma once

#include <cstdint>
#include <vector>

#include "netfdi/gain_design.hpp"
#include "netfdi/observability.hpp"
#include "netfdi/sensor_network.hpp"
#include "netfdi/system_model.hpp"

namespace netfdi {

/// Per-sensor estimates at one step of the single time-scale protocol.
struct EstimatorState {
    int step = 0;
    std::vector<Vector> posterior;  // x^i_{k|k}
    std::vector<Vector> prior;      // x^i_{k|k-1}
};

struct ErrorTrace {
    // collective[k] stacks e_k^i = x_k - x^i_{k|k} over sensors (Nn vector)
    std::vector<Vector> collective;
    std::vector<std::vector<double>> squared_error;  // [k][sensor] ||e_k^i||^2
    std::vector<double> msee;                        // mean over sensors of ||e_k^i||^2 / n
};

struct FilterRun {
    std::vector<Vector> states;        // x_k, k = 0..steps
    std::vector<Vector> measurements;  // y_k, k = 1..steps
    std::vector<Vector> process_noise;     // nu_{k-1} driving x_k
    std::vector<Vector> measurement_noise; // zeta_k
    std::vector<Vector> faults;            // f_k
    std::vector<std::vector<double>> residuals;  // [k-1][sensor] |y^i_k - C_i x^i_{k|k}|
    ErrorTrace errors;                 // indexed from k = 0 (initial error) to steps
    EstimatorState final_state;
    int exchanges_per_step = 1;        // single time-scale contract
};

/// Consensus on propagated posteriors: each prior is the W-weighted
/// combination of A * neighbor posteriors. One exchange round per step.
std::vector<Vector> prior_update(const std::vector<Vector>& posteriors,
                                 const SensorNetwork& net, const Matrix& A);

/// Innovation correction, each sensor using only its own measurement.
std::vector<Vector> posterior_update(const std::vector<Vector>& priors,
                                     const MeasurementModel& mm,
                                     const Matrix& gain_columns, const Vector& y);

FilterRun run_filter(const SystemModel& sys, const MeasurementModel& mm,
                     const SensorNetwork& net, const Matrix& gain_columns,
                     const FaultProfile& faults, int steps, uint64_t seed,
                     const std::vector<Vector>* initial_estimates = nullptr);

/// Propagates the collective error recursion e_k = Ahat e_{k-1} + eta_k
/// with eta assembled from the recorded noise and fault samples. Serves as
/// an independent check of the filter's error dynamics.
std::vector<Vector> error_recursion_oracle(const Matrix& Ahat, const Matrix& K,
                                           const Matrix& D_C, const Matrix& D_C_bar,
                                           const std::vector<Vector>& process_noise,
                                           const std::vector<Vector>& measurement_noise,
                                           const std::vector<Vector>& faults,
                                           const Vector& e0);

}  // namespace netfdi
