#include "netfdi/system_model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace netfdi {

int StructuredMatrix::nonzero_count() const {
    int c = 0;
    for (bool b : pattern) c += b ? 1 : 0;
    return c;
}

StructuredMatrix StructuredMatrix::transposed() const {
    StructuredMatrix t;
    t.n = n;
    t.pattern.assign(pattern.size(), false);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) t.set(j, i, at(i, j));
    return t;
}

StructuredMatrix StructuredMatrix::identity(int n) {
    StructuredMatrix s;
    s.n = n;
    s.pattern.assign(static_cast<size_t>(n) * n, false);
    for (int i = 0; i < n; ++i) s.set(i, i, true);
    return s;
}

StructuredMatrix StructuredMatrix::full(int n) {
    StructuredMatrix s;
    s.n = n;
    s.pattern.assign(static_cast<size_t>(n) * n, true);
    return s;
}

StructuredMatrix StructuredMatrix::parse(const std::string& text) {
    std::vector<std::string> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string cleaned;
        for (char c : line) {
            if (c == '*' || c == '0') cleaned.push_back(c);
        }
        if (!cleaned.empty()) rows.push_back(cleaned);
    }
    if (rows.empty()) throw std::invalid_argument("empty pattern");
    const int n = static_cast<int>(rows.size());
    StructuredMatrix s;
    s.n = n;
    s.pattern.assign(static_cast<size_t>(n) * n, false);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            throw std::invalid_argument("pattern is not square");
        for (int j = 0; j < n; ++j) s.set(i, j, rows[i][j] == '*');
    }
    return s;
}

StructuredMatrix StructuredMatrix::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pattern file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

Matrix MeasurementModel::dense_C() const {
    Matrix C = Matrix::Zero(count(), n);
    for (int i = 0; i < count(); ++i) C(i, sensors[i].measured_state) = sensors[i].gain;
    return C;
}

Vector FaultProfile::at(int step, int num_sensors) const {
    Vector f = Vector::Zero(num_sensors);
    for (const auto& iv : intervals) {
        if (step >= iv.onset && (!iv.offset || step < *iv.offset)) f(iv.sensor) += iv.bias;
    }
    return f;
}

double spectral_radius(const Matrix& m) {
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

int numerical_rank(const Matrix& m, double rel_tol) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cutoff = rel_tol * sv(0);
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    return r;
}

SystemModel realize_system(const StructuredMatrix& pattern, WeightRule rule,
                           double target_rho, uint64_t seed, double process_variance,
                           int max_attempts) {
    if (pattern.n <= 0) throw std::invalid_argument("pattern must be non-empty");
    if (target_rho <= 0.0) throw std::invalid_argument("target_rho must be positive");
    const int n = pattern.n;

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::mt19937_64 rng(seed + static_cast<uint64_t>(attempt));
        std::uniform_real_distribution<double> mag(0.5, 1.5);
        std::uniform_real_distribution<double> logmag(std::log(0.05), std::log(1.5));
        std::bernoulli_distribution flip(0.5);

        Matrix A = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (!pattern.at(i, j)) continue;
                double w = 1.0;
                if (rule != WeightRule::ConstantOne) {
                    w = rule == WeightRule::LogUniformSigned ? std::exp(logmag(rng))
                                                             : mag(rng);
                    // diagonal entries keep positive sign so self-loops stay put
                    if (i != j && flip(rng)) w = -w;
                }
                A(i, j) = w;
            }
        }

        const double rho = spectral_radius(A);
        if (rho <= 0.0) continue;
        A *= target_rho / rho;
        if (numerical_rank(A) < n) continue;

        SystemModel model;
        model.A = std::move(A);
        model.Q = process_variance * Matrix::Identity(n, n);
        model.x0 = Vector::Zero(n);
        return model;
    }
    throw std::runtime_error("realize_system: no full-rank realization within attempt budget");
}

Vector step_dynamics(const SystemModel& model, const Vector& x, const Vector& noise) {
    if (x.size() != model.A.cols() || noise.size() != model.A.rows())
        throw std::invalid_argument("step_dynamics: dimension mismatch");
    return model.A * x + noise;
}

Vector measure(const MeasurementModel& mm, const Vector& x, const Vector& noise,
               const Vector& fault) {
    if (x.size() != mm.n || noise.size() != mm.count() || fault.size() != mm.count())
        throw std::invalid_argument("measure: dimension mismatch");
    Vector y(mm.count());
    for (int i = 0; i < mm.count(); ++i)
        y(i) = mm.sensors[i].gain * x(mm.sensors[i].measured_state) + noise(i) + fault(i);
    return y;
}

Vector sample_noise(double variance, int dim, std::mt19937_64& rng) {
    if (variance < 0.0) throw std::invalid_argument("variance must be non-negative");
    Vector v = Vector::Zero(dim);
    if (variance == 0.0) return v;
    std::normal_distribution<double> dist(0.0, std::sqrt(variance));
    for (int i = 0; i < dim; ++i) v(i) = dist(rng);
    return v;
}

Vector sample_noise(const Matrix& covariance, std::mt19937_64& rng) {
    const int dim = static_cast<int>(covariance.rows());
    Eigen::LLT<Matrix> llt(covariance);
    Matrix L;
    if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
    } else {
        // PSD but singular: fall back to an eigendecomposition square root
        Eigen::SelfAdjointEigenSolver<Matrix> es(covariance);
        Vector ev = es.eigenvalues();
        if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("sample_noise: covariance is not PSD");
        L = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector z(dim);
    for (int i = 0; i < dim; ++i) z(i) = dist(rng);
    return L * z;
}

}  // namespace netfdi
