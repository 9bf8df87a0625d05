#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "netfdi/observability.hpp"
#include "netfdi/sensor_network.hpp"
#include "netfdi/system_model.hpp"

namespace netfdi {

/// Block-diagonal gain design for Ahat = W(x)A - K D_C W(x)A.
/// Only the column of each K^i aligned with C_i^T's support enters the
/// closed loop, so the search space is one n-vector per sensor.
struct GainDesignProblem {
    Matrix WA;                        // W (x) A, (Nn) x (Nn)
    std::vector<int> measured_state;  // m_i per sensor
    std::vector<double> sensor_gain;  // c_i per sensor
    int n = 0;
    int N = 0;
    double trace_eps = 1e-3;     // stop when trace objective is within eps of 2nN
    int iteration_cap = 200;     // outer cone-complementarity iterations
    double constraint_tol = 1e-7;

    int dim() const { return n * N; }
    static GainDesignProblem make(const SensorNetwork& net, const SystemModel& sys,
                                  const MeasurementModel& mm);
};

enum class GainMethod { Lmi, Fallback };
enum class GainError { None, Infeasible, NotConverged };

struct GainResult {
    bool success = false;
    GainMethod method = GainMethod::Lmi;
    GainError error = GainError::None;
    Matrix gain_columns;  // n x N, column i = active column of K^i
    Matrix K;             // Nn x Nn block-diagonal
    Matrix Ahat;
    double rho = 0.0;
    double spectral_norm = 0.0;               // b = ||Ahat||_2
    std::vector<double> trace_history;        // recorded objective per iteration
    std::vector<double> sensor_feedthrough;   // |C_i K^i C_i^T|
    Matrix X, Y;                              // final LMI variables (lmi method only)
};

struct SchurReport {
    double rho = 0.0;
    double spectral_norm = 0.0;
    bool stable = false;
};

SchurReport verify_schur(const Matrix& Ahat);

Matrix assemble_Ahat(const Matrix& W, const Matrix& A, const Matrix& K,
                     const Matrix& D_C);

/// Closed loop from the per-sensor active columns (n x N).
Matrix assemble_Ahat(const GainDesignProblem& p, const Matrix& gain_columns);

/// Expands active columns into the dense block-diagonal K.
Matrix expand_block_gain(const GainDesignProblem& p, const Matrix& gain_columns);

/// Iterative cone-complementarity linearization: minimize
/// trace(Y_t X + X_t Y) under the two feasibility LMIs until Ahat is Schur
/// or the trace objective converges to 2nN.
GainResult cone_complementarity_design(const GainDesignProblem& problem);

/// Output-injection sweep followed by spectral-radius descent. Robustness
/// path for when the LMI iteration stalls.
GainResult fallback_gain_search(const GainDesignProblem& problem, int budget,
                                uint64_t seed);

/// LMI first, fallback on failure.
GainResult design_gain(const GainDesignProblem& problem,
                       int fallback_budget = 4000, uint64_t seed = 1);

/// Smallest eigenvalues of the two LMI blocks at (X, Y, gain_columns);
/// used to audit the solver's tolerance contract.
std::pair<double, double> lmi_residuals(const GainDesignProblem& p, const Matrix& X,
                                        const Matrix& Y, const Matrix& gain_columns);

}  // namespace netfdi
