#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>
#include <random>

#include "netfdi/observability.hpp"

using namespace netfdi;

namespace {

Matrix random_matrix(int rows, int cols, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
    return m;
}

// rank of the fully materialized stack [H; HF; ...; HF^{d-1}] via column
// pivoted QR -- the textbook construction the incremental routine replaces
int stacked_rank_oracle(const Matrix& F, const Matrix& H) {
    const int d = static_cast<int>(F.rows());
    Matrix stack(H.rows() * d, F.cols());
    Matrix block = H;
    for (int k = 0; k < d; ++k) {
        stack.middleRows(k * H.rows(), H.rows()) = block;
        block = block * F;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(stack);
    qr.setThreshold(1e-10);
    return static_cast<int>(qr.rank());
}

MeasurementModel fixture_sensors() {
    MeasurementModel mm;
    mm.n = 12;
    // one sensor per parent SCC of the 12-state fixture: states 1,3,12,8
    mm.sensors = {{0, 1.0, 0.04}, {2, 1.0, 0.04}, {11, 1.0, 0.04}, {7, 1.0, 0.04}};
    return mm;
}

}  // namespace

TEST_CASE("kron matches the definition entrywise") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 0, 5, 6, 7;
    const Matrix k = kron(a, b);
    REQUIRE(k.rows() == 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(k(i, j) == a(i / 2, j / 2) * b(i % 2, j % 2));

    // mixed-product identity (A x B)(C x D) = AC x BD on random inputs
    const Matrix A = random_matrix(3, 2, 1), B = random_matrix(2, 4, 2);
    const Matrix C = random_matrix(2, 3, 3), D = random_matrix(4, 2, 4);
    CHECK((kron(A, B) * kron(C, D)).isApprox(kron(A * C, B * D), 1e-12));

    CHECK(kron(Matrix::Identity(3, 3), Matrix::Identity(2, 2))
              .isApprox(Matrix::Identity(6, 6)));
}

TEST_CASE("output blocks place c^2 and c at the measured coordinates") {
    MeasurementModel mm;
    mm.n = 3;
    mm.sensors = {{1, 2.0, 0.04}, {0, 1.0, 0.04}};
    const OutputBlocks b = build_output_blocks(mm);

    REQUIRE(b.D_C.rows() == 6);
    REQUIRE(b.D_C_bar.cols() == 2);
    CHECK(b.D_C(1, 1) == 4.0);  // sensor 0 on state 1, gain 2
    CHECK(b.D_C(3, 3) == 1.0);  // sensor 1 on state 0
    CHECK(b.D_C.cwiseAbs().sum() == 5.0);
    CHECK(b.D_C_bar(1, 0) == 2.0);
    CHECK(b.D_C_bar(3, 1) == 1.0);
    CHECK(b.D_C_bar.cwiseAbs().sum() == 3.0);

    // block-diagonal oracle: D_C = blockdiag(C_i^T C_i), D_C_bar = blockdiag(C_i^T)
    for (int i = 0; i < 2; ++i) {
        Matrix Ci = Matrix::Zero(1, 3);
        Ci(0, mm.sensors[i].measured_state) = mm.sensors[i].gain;
        CHECK(b.D_C.block(3 * i, 3 * i, 3, 3).isApprox(Ci.transpose() * Ci));
        CHECK(b.D_C_bar.block(3 * i, i, 3, 1).isApprox(Ci.transpose()));
    }
    // off-diagonal blocks vanish
    CHECK(b.D_C.block(0, 3, 3, 3).isZero());
    CHECK(b.D_C.block(3, 0, 3, 3).isZero());
}

TEST_CASE("is_observable basic verdicts") {
    // H = I observes everything regardless of F
    auto rep = is_observable(random_matrix(5, 5, 10), Matrix::Identity(5, 5));
    CHECK(rep.observable);
    CHECK(rep.rank == 5);
    CHECK(rep.dimension == 5);

    // diagonal F with one output row sees each distinct mode
    Matrix F = Matrix::Zero(3, 3);
    F.diagonal() << 1.0, 2.0, 3.0;
    Matrix H = Matrix::Ones(1, 3);
    CHECK(is_observable(F, H).observable);

    // repeated eigenvalue with a single output: rank stalls at 2
    F.diagonal() << 1.0, 2.0, 2.0;
    const auto rep2 = is_observable(F, H);
    CHECK(!rep2.observable);
    CHECK(rep2.rank == 2);

    // zero output matrix
    CHECK(is_observable(F, Matrix::Zero(1, 3)).rank == 0);

    CHECK_THROWS(is_observable(random_matrix(3, 4, 1), Matrix::Identity(3, 3)));
    CHECK_THROWS(is_observable(Matrix::Identity(3, 3), Matrix::Identity(4, 4)));
}

TEST_CASE("is_observable agrees with the materialized-stack oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(2, 7), rows(1, 3);
    std::bernoulli_distribution degenerate(0.4);
    for (int trial = 0; trial < 40; ++trial) {
        const int d = dim(rng);
        Matrix F = random_matrix(d, d, 100 + trial);
        F /= std::max(1.0, F.cwiseAbs().maxCoeff());
        Matrix H = random_matrix(rows(rng), d, 200 + trial);
        if (degenerate(rng)) {
            // zero a column of H and make that state unreachable from the
            // rest so the pair is genuinely unobservable
            H.col(0).setZero();
            F.col(0).setZero();
            F(0, 0) = 0.5;
        }
        const auto rep = is_observable(F, H);
        CHECK(rep.rank == stacked_rank_oracle(F, H));
        CHECK(rep.observable == (rep.rank == d));
    }
}

TEST_CASE("is_observable is invariant to output scaling") {
    const Matrix F = random_matrix(6, 6, 55);
    const Matrix H = random_matrix(2, 6, 56);
    const auto base = is_observable(F, H);
    for (double s : {1e-6, 1e-3, 1e3, 1e6}) {
        const auto scaled = is_observable(F, s * H);
        CHECK(scaled.rank == base.rank);
        CHECK(scaled.observable == base.observable);
    }
}

TEST_CASE("12-state fixture: classical observability holds, drops with a sensor removed") {
    const StructuredMatrix p = StructuredMatrix::load("data/benchmark12.pattern");
    const MeasurementModel mm = fixture_sensors();
    for (uint64_t seed : {1ull, 5ull, 9ull}) {
        const SystemModel sys =
            realize_system(p.transposed(), WeightRule::UniformSigned, 1.2, seed);
        CHECK(is_observable(sys.A, mm.dense_C()).observable);

        // dropping any one sensor orphans its parent component
        for (size_t drop = 0; drop < mm.sensors.size(); ++drop) {
            MeasurementModel cut = mm;
            cut.sensors.erase(cut.sensors.begin() + drop);
            CHECK(!is_observable(sys.A, cut.dense_C()).observable);
        }
    }
}

TEST_CASE("networked observability on the fixture with a randomized 4-cycle") {
    const StructuredMatrix p = StructuredMatrix::load("data/benchmark12.pattern");
    const MeasurementModel mm = fixture_sensors();
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        const SystemModel sys =
            realize_system(p.transposed(), WeightRule::UniformSigned, 1.2, seed);
        const SensorNetwork net = build_row_stochastic(
            4, cycle_edges(4), ConsensusWeightRule::SeededRandom, seed);
        const auto rep = networked_observability(net, sys, mm);
        CHECK(rep.observable);
        CHECK(rep.rank == 48);
        CHECK(rep.network_strongly_connected);
    }
}

TEST_CASE("networked observability flags a non-strongly-connected network") {
    const StructuredMatrix p = StructuredMatrix::load("data/benchmark12.pattern");
    const SystemModel sys = realize_system(p.transposed(), WeightRule::UniformSigned, 1.2, 1);
    const SensorNetwork chain = build_row_stochastic(
        4, {{0, 1}, {1, 2}, {2, 3}}, ConsensusWeightRule::SeededRandom, 1);
    const auto rep = networked_observability(chain, sys, fixture_sensors());
    CHECK(!rep.network_strongly_connected);
}

TEST_CASE("single-sensor network reduces to the classical test") {
    const Matrix A = random_matrix(4, 4, 71);
    SystemModel sys;
    sys.A = A;
    MeasurementModel mm;
    mm.n = 4;
    mm.sensors = {{2, 1.5, 0.04}};
    const SensorNetwork net =
        build_row_stochastic(1, {{0, 0}}, ConsensusWeightRule::Uniform);
    REQUIRE(net.W(0, 0) == 1.0);

    const auto networked = networked_observability(net, sys, mm);
    // with N = 1, W x A = A and D_C = C^T C; ranks must match the classical pair
    const auto classical = is_observable(A, mm.dense_C());
    CHECK(networked.rank == classical.rank);
    CHECK(networked.observable == classical.observable);
}
