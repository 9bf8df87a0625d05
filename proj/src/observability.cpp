#include "netfdi/observability.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <stdexcept>

namespace netfdi {

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

OutputBlocks build_output_blocks(const MeasurementModel& mm) {
    const int n = mm.n;
    const int N = mm.count();
    OutputBlocks out;
    out.D_C = Matrix::Zero(N * n, N * n);
    out.D_C_bar = Matrix::Zero(N * n, N);
    for (int i = 0; i < N; ++i) {
        const int m = mm.sensors[i].measured_state;
        const double c = mm.sensors[i].gain;
        out.D_C(i * n + m, i * n + m) = c * c;
        out.D_C_bar(i * n + m, i) = c;
    }
    return out;
}

ObservabilityReport is_observable(const Matrix& F, const Matrix& H, double rel_tol) {
    if (F.rows() != F.cols() || H.cols() != F.rows())
        throw std::invalid_argument("is_observable: dimension mismatch");
    const int d = static_cast<int>(F.rows());

    ObservabilityReport rep;
    rep.dimension = d;

    // rank of [H; HF; ...; HF^{d-1}] equals the dimension of the Krylov
    // span {H^T, F^T H^T, ...}. Tracking an orthonormal basis of that span
    // and renormalizing admitted directions keeps the computation well
    // conditioned where a raw power stack underflows the rank cutoff.
    const Matrix Ft = F.transpose();
    Matrix basis = Matrix::Zero(d, d);
    int rank = 0;
    double smallest = 0.0;

    auto admit = [&](Vector w) -> bool {
        const double wnorm = w.norm();
        if (wnorm == 0.0) return false;
        // two projection passes for reorthogonalization
        for (int pass = 0; pass < 2; ++pass)
            w -= basis.leftCols(rank) * (basis.leftCols(rank).transpose() * w);
        const double rnorm = w.norm();
        if (rnorm <= rel_tol * wnorm) return false;
        basis.col(rank++) = w / rnorm;
        if (smallest == 0.0 || rnorm / wnorm < smallest) smallest = rnorm / wnorm;
        return true;
    };

    std::vector<int> frontier;  // basis columns admitted last round
    for (Eigen::Index r = 0; r < H.rows() && rank < d; ++r)
        if (admit(H.row(r).transpose())) frontier.push_back(rank - 1);

    while (!frontier.empty() && rank < d) {
        std::vector<int> next;
        for (int col : frontier) {
            if (rank == d) break;
            if (admit(Ft * basis.col(col))) next.push_back(rank - 1);
        }
        frontier.swap(next);
    }

    rep.rank = rank;
    rep.smallest_retained_sv = smallest;
    rep.observable = (rank == d);
    return rep;
}

ObservabilityReport networked_observability(const SensorNetwork& net,
                                            const SystemModel& sys,
                                            const MeasurementModel& mm) {
    const Matrix F = kron(net.W, sys.A);
    const OutputBlocks blocks = build_output_blocks(mm);
    ObservabilityReport rep = is_observable(F, blocks.D_C);
    rep.network_strongly_connected = is_strongly_connected(net.size, net.edges);
    return rep;
}

}  // namespace netfdi
