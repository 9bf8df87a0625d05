#include "netfdi/fdi.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace netfdi {

double ThresholdSet::level(int percent) const {
    switch (percent) {
        case 68: return t68;
        case 95: return t95;
        case 99: return t99;
        default: throw std::invalid_argument("unsupported confidence level");
    }
}

double residual(double y_i, const Vector& posterior, int measured_state, double gain) {
    return std::abs(y_i - gain * posterior(measured_state));
}

ThresholdSet compute_thresholds(const GainResult& gain, const MeasurementModel& mm,
                                const Matrix& Q) {
    ThresholdSet t;
    t.b = gain.spectral_norm;
    if (t.b >= 1.0) throw ThresholdUnavailable{t.b};

    const int N = mm.count();
    const int n = mm.n;
    const int Nn = N * n;

    const OutputBlocks blocks = build_output_blocks(mm);
    auto norm2 = [](const Matrix& m) {
        Eigen::BDCSVD<Matrix> svd(m);
        return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    };

    const Matrix IKD = Matrix::Identity(Nn, Nn) - gain.K * blocks.D_C;
    t.alpha1 = std::pow(norm2(IKD), 2);
    t.alpha2 = std::pow(norm2(gain.K), 2);

    // Rbar = blockdiag(C_i^T R_i C_i): diagonal with c_i^2 R_i at (m_i, m_i)
    double rbar_norm = 0.0;
    double r_norm = 0.0;
    double c = 0.0;
    for (const auto& s : mm.sensors) {
        rbar_norm = std::max(rbar_norm, s.gain * s.gain * s.noise_variance);
        r_norm = std::max(r_norm, s.noise_variance);
        c = std::max(c, std::abs(s.gain));
    }
    t.beta = r_norm > 0.0 ? rbar_norm / r_norm : 0.0;
    t.c = c;
    t.q_norm = norm2(Q);
    t.r_norm = r_norm;

    t.phi = (t.alpha1 * N * t.q_norm + t.alpha2 * t.beta * t.r_norm) /
            (N * (1.0 - t.b * t.b));
    t.t68 = t.c * t.phi + t.r_norm;
    t.t95 = 2.0 * t.c * t.phi + 2.0 * t.r_norm;
    t.t99 = 3.0 * t.c * t.phi + 3.0 * t.r_norm;
    return t;
}

bool steady_state_covariance_bound_check(const std::vector<ErrorTrace>& traces,
                                         const ThresholdSet& thresholds, int burn_in,
                                         int state_dim) {
    for (const auto& trace : traces) {
        const int T = static_cast<int>(trace.collective.size());
        if (T <= burn_in) continue;
        const int Nn = static_cast<int>(trace.collective[0].size());
        const int N = Nn / state_dim;
        for (int i = 0; i < N; ++i) {
            double acc = 0.0;
            int count = 0;
            for (int k = burn_in; k < T; ++k) {
                acc += trace.collective[k].segment(i * state_dim, state_dim).squaredNorm();
                count += state_dim;
            }
            if (acc / count > thresholds.phi) return false;
        }
    }
    return true;
}

FdiReport detect_and_isolate(const std::vector<std::vector<double>>& residuals,
                             const ThresholdSet& thresholds, int burn_in,
                             int persistence, int decision_level) {
    if (persistence < 1) throw std::invalid_argument("persistence must be >= 1");

    FdiReport rep;
    rep.residuals = residuals;
    rep.burn_in = burn_in;
    rep.persistence = persistence;
    rep.decision_level = decision_level;

    const int T = static_cast<int>(residuals.size());
    const int N = T > 0 ? static_cast<int>(residuals[0].size()) : 0;
    rep.verdicts.assign(N, {});

    const int levels[3] = {68, 95, 99};
    for (int i = 0; i < N; ++i) {
        auto& v = rep.verdicts[i];
        for (int li = 0; li < 3; ++li) {
            const double threshold = thresholds.level(levels[li]);
            int consecutive = 0;
            for (int k = 0; k < T; ++k) {
                // residuals[k] holds step k+1 of the run
                const int step = k + 1;
                if (step < burn_in) continue;
                consecutive = residuals[k][i] > threshold ? consecutive + 1 : 0;
                if (consecutive >= persistence) {
                    switch (levels[li]) {
                        case 68: v.first_crossing_68 = step; break;
                        case 95: v.first_crossing_95 = step; break;
                        case 99: v.first_crossing_99 = step; break;
                    }
                    break;
                }
            }
        }
        if (v.first_crossing_99) v.level = FaultLevel::L99;
        else if (v.first_crossing_95) v.level = FaultLevel::L95;
        else if (v.first_crossing_68) v.level = FaultLevel::L68;

        const bool isolated = (decision_level <= 68 && v.first_crossing_68) ||
                              (decision_level > 68 && decision_level <= 95 &&
                               v.first_crossing_95) ||
                              (decision_level > 95 && v.first_crossing_99);
        if (isolated) rep.isolated.push_back(i);
    }
    return rep;
}

}  // namespace netfdi
