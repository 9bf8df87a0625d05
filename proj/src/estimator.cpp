#include "netfdi/estimator.hpp"

#include <cmath>
#include <stdexcept>

namespace netfdi {

std::vector<Vector> prior_update(const std::vector<Vector>& posteriors,
                                 const SensorNetwork& net, const Matrix& A) {
    const int N = net.size;
    if (static_cast<int>(posteriors.size()) != N)
        throw std::invalid_argument("prior_update: posterior count mismatch");

    // propagate once, then mix: W_ij (A xhat^j)
    std::vector<Vector> propagated(N);
    for (int j = 0; j < N; ++j) propagated[j] = A * posteriors[j];

    std::vector<Vector> priors(N);
    for (int i = 0; i < N; ++i) {
        Vector p = Vector::Zero(A.rows());
        for (int j = 0; j < N; ++j)
            if (net.W(i, j) != 0.0) p += net.W(i, j) * propagated[j];
        priors[i] = std::move(p);
    }
    return priors;
}

std::vector<Vector> posterior_update(const std::vector<Vector>& priors,
                                     const MeasurementModel& mm,
                                     const Matrix& gain_columns, const Vector& y) {
    const int N = mm.count();
    if (static_cast<int>(priors.size()) != N || y.size() != N)
        throw std::invalid_argument("posterior_update: dimension mismatch");

    std::vector<Vector> posteriors(N);
    for (int i = 0; i < N; ++i) {
        const auto& s = mm.sensors[i];
        const double innovation = y(i) - s.gain * priors[i](s.measured_state);
        // K^i C_i^T = c_i * (active column of K^i)
        posteriors[i] = priors[i] + s.gain * gain_columns.col(i) * innovation;
    }
    return posteriors;
}

FilterRun run_filter(const SystemModel& sys, const MeasurementModel& mm,
                     const SensorNetwork& net, const Matrix& gain_columns,
                     const FaultProfile& faults, int steps, uint64_t seed,
                     const std::vector<Vector>* initial_estimates) {
    const int n = sys.n();
    const int N = mm.count();
    if (mm.n != n || net.size != N)
        throw std::invalid_argument("run_filter: inconsistent dimensions");

    std::mt19937_64 rng(seed);

    FilterRun run;
    Vector x = sys.x0;
    std::vector<Vector> posterior(N, Vector::Zero(n));
    if (initial_estimates) {
        if (static_cast<int>(initial_estimates->size()) != N)
            throw std::invalid_argument("run_filter: bad initial estimates");
        posterior = *initial_estimates;
    }

    auto record_error = [&](const Vector& xk, const std::vector<Vector>& post) {
        Vector e(N * n);
        std::vector<double> sq(N);
        double msee = 0.0;
        for (int i = 0; i < N; ++i) {
            e.segment(i * n, n) = xk - post[i];
            sq[i] = e.segment(i * n, n).squaredNorm();
            msee += sq[i] / n;
        }
        run.errors.collective.push_back(std::move(e));
        run.errors.squared_error.push_back(std::move(sq));
        run.errors.msee.push_back(msee / N);
    };

    run.states.push_back(x);
    record_error(x, posterior);

    const bool scalar_q = sys.Q.isDiagonal() && n > 0;
    const double q_diag = n > 0 ? sys.Q(0, 0) : 0.0;
    bool uniform_q = scalar_q;
    for (int i = 0; uniform_q && i < n; ++i) uniform_q = (sys.Q(i, i) == q_diag);

    for (int k = 1; k <= steps; ++k) {
        // nu_{k-1} drives x_k; zeta_k corrupts y_k (recursion index contract)
        Vector nu = uniform_q ? sample_noise(q_diag, n, rng) : sample_noise(sys.Q, rng);
        Vector zeta(N);
        {
            Vector unit = sample_noise(1.0, N, rng);
            for (int i = 0; i < N; ++i)
                zeta(i) = std::sqrt(mm.sensors[i].noise_variance) * unit(i);
        }
        const Vector f = faults.at(k, N);

        x = step_dynamics(sys, x, nu);
        const Vector y = measure(mm, x, zeta, f);

        const auto priors = prior_update(posterior, net, sys.A);
        posterior = posterior_update(priors, mm, gain_columns, y);

        std::vector<double> res(N);
        for (int i = 0; i < N; ++i) {
            const auto& s = mm.sensors[i];
            res[i] = std::abs(y(i) - s.gain * posterior[i](s.measured_state));
        }

        run.states.push_back(x);
        run.measurements.push_back(y);
        run.process_noise.push_back(std::move(nu));
        run.measurement_noise.push_back(std::move(zeta));
        run.faults.push_back(f);
        run.residuals.push_back(std::move(res));
        record_error(x, posterior);

        run.final_state.prior = priors;
    }
    run.final_state.step = steps;
    run.final_state.posterior = posterior;
    return run;
}

std::vector<Vector> error_recursion_oracle(const Matrix& Ahat, const Matrix& K,
                                           const Matrix& D_C, const Matrix& D_C_bar,
                                           const std::vector<Vector>& process_noise,
                                           const std::vector<Vector>& measurement_noise,
                                           const std::vector<Vector>& faults,
                                           const Vector& e0) {
    const size_t steps = process_noise.size();
    if (measurement_noise.size() != steps || faults.size() != steps)
        throw std::invalid_argument("error_recursion_oracle: record length mismatch");

    const int Nn = static_cast<int>(Ahat.rows());
    const int n = static_cast<int>(process_noise.empty() ? 0 : process_noise[0].size());
    const int N = n > 0 ? Nn / n : 0;

    std::vector<Vector> errors;
    errors.reserve(steps + 1);
    errors.push_back(e0);

    Vector e = e0;
    for (size_t k = 0; k < steps; ++k) {
        // eta_k = 1_N (x) nu_{k-1} - K D_C (1_N (x) nu_{k-1}) - K Dbar_C zeta_k - K Dbar_C f_k
        Vector stacked_nu(Nn);
        for (int i = 0; i < N; ++i) stacked_nu.segment(i * n, n) = process_noise[k];
        Vector eta = stacked_nu - K * (D_C * stacked_nu) -
                     K * (D_C_bar * measurement_noise[k]) - K * (D_C_bar * faults[k]);
        e = Ahat * e + eta;
        errors.push_back(e);
    }
    return errors;
}

}  // namespace netfdi
