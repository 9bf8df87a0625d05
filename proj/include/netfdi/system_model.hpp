#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace netfdi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Zero/nonzero support of a square system matrix.
struct StructuredMatrix {
    int n = 0;
    // row-major n*n grid, true where the realized matrix must be nonzero
    std::vector<bool> pattern;

    bool at(int i, int j) const { return pattern[static_cast<size_t>(i) * n + j]; }
    void set(int i, int j, bool v) { pattern[static_cast<size_t>(i) * n + j] = v; }
    int nonzero_count() const;

    StructuredMatrix transposed() const;

    static StructuredMatrix identity(int n);
    static StructuredMatrix full(int n);
    /// Parses n lines of n characters, '*' = nonzero, '0' = zero.
    static StructuredMatrix parse(const std::string& text);
    static StructuredMatrix load(const std::string& path);
};

/// Discrete LTI plant x_{k+1} = A x_k + v_k with v_k ~ N(0, Q).
struct SystemModel {
    Matrix A;
    Matrix Q;   // n x n process-noise covariance
    Vector x0;

    int n() const { return static_cast<int>(A.rows()); }
};

struct SensorRecord {
    int measured_state = 0;  // index into 0..n-1
    double gain = 1.0;       // the single nonzero entry of C_i
    double noise_variance = 0.04;

    bool operator==(const SensorRecord&) const = default;
};

/// Per-sensor scalar measurements y_i = c_i x[m_i] + noise + fault.
struct MeasurementModel {
    int n = 0;
    std::vector<SensorRecord> sensors;

    int count() const { return static_cast<int>(sensors.size()); }
    /// Stacked N x n measurement matrix C.
    Matrix dense_C() const;
};

struct FaultInterval {
    int sensor = 0;
    int onset = 0;
    std::optional<int> offset;  // exclusive; open-ended when absent
    double bias = 0.0;

    bool operator==(const FaultInterval&) const = default;
};

/// Additive sensor bias schedule; evaluates to the fault vector f_k.
struct FaultProfile {
    std::vector<FaultInterval> intervals;

    Vector at(int step, int num_sensors) const;
    bool empty() const { return intervals.empty(); }
    bool operator==(const FaultProfile&) const = default;
};

enum class WeightRule {
    UniformSigned,    // |w| ~ U[0.5, 1.5], random sign off the diagonal
    LogUniformSigned, // |w| log-uniform on [0.05, 1.5]; wider dynamic range
    ConstantOne,
};

/// Samples nonzero weights on the pattern support and rescales so that
/// rho(A) hits target_rho. Resamples with successive seeds if the draw
/// is rank-deficient; gives up after max_attempts.
SystemModel realize_system(const StructuredMatrix& pattern, WeightRule rule,
                           double target_rho, uint64_t seed,
                           double process_variance = 0.0,
                           int max_attempts = 100);

Vector step_dynamics(const SystemModel& model, const Vector& x, const Vector& noise);

Vector measure(const MeasurementModel& mm, const Vector& x, const Vector& noise,
               const Vector& fault);

/// i.i.d. zero-mean Gaussian draw, one component per dimension. Scalar
/// variance q means covariance q*I.
Vector sample_noise(double variance, int dim, std::mt19937_64& rng);
Vector sample_noise(const Matrix& covariance, std::mt19937_64& rng);

/// Numerical rank with singular values below tol*sigma_max treated as zero.
int numerical_rank(const Matrix& m, double rel_tol = 1e-10);

double spectral_radius(const Matrix& m);

}  // namespace netfdi
