#include "scmlab/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "scmlab/errors.hpp"
#include "scmlab/rng.hpp"

namespace scm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAsinTol = 1e-9;
// relative to the product of variances; matches the slack kAsinTol allows
constexpr double kSqrtTol = 2e-9;
constexpr double kVarTol = 1e-12;
constexpr double kSymTol = 1e-12;

double clamp_unit(double x, const char* what) {
    if (std::isnan(x)) throw DomainError(std::string(what) + ": NaN correlation");
    if (x > 1.0) {
        if (x > 1.0 + kAsinTol) throw DomainError(std::string(what) + ": correlation " + std::to_string(x) + " > 1");
        return 1.0;
    }
    if (x < -1.0) {
        if (x < -1.0 - kAsinTol) throw DomainError(std::string(what) + ": correlation " + std::to_string(x) + " < -1");
        return -1.0;
    }
    return x;
}

double clamped_sqrt(double x, double scale, const char* what) {
    if (x >= 0.0) return std::sqrt(x);
    if (x > -kSqrtTol * scale) return 0.0;
    throw DomainError(std::string(what) + ": negative Gram determinant " + std::to_string(x));
}

// Variances within roundoff of zero (e.g. a unit switched off by the dynamics)
// are treated as exactly zero.
double checked_variance(double v, const char* what) {
    if (v >= 0.0) return v;
    if (v > -kVarTol) return 0.0;
    throw DomainError(std::string(what) + ": negative or NaN variance");
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

const double kErfScale = 1.0 / std::numbers::sqrt2;
const double kErfDerivScale = std::sqrt(2.0 / kPi);

}  // namespace

std::string_view to_string(ActivationKind act) {
    return act == ActivationKind::ReLU ? "relu" : "erf";
}

ActivationKind parse_activation(std::string_view name) {
    if (name == "relu" || name == "ReLU") return ActivationKind::ReLU;
    if (name == "erf" || name == "Erf") return ActivationKind::Erf;
    throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu or erf)");
}

double activation(ActivationKind act, double x) noexcept {
    return act == ActivationKind::ReLU ? relu(x) : std::erf(x * kErfScale);
}

double activation_derivative(ActivationKind act, double x) noexcept {
    if (act == ActivationKind::ReLU) return x > 0.0 ? 1.0 : 0.0;
    return kErfDerivScale * std::exp(-0.5 * x * x);
}

namespace moments {

Covariance3 Covariance3::from_matrix(const Eigen::Matrix3d& m) {
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            if (std::fabs(m(a, b) - m(b, a)) > kSymTol * (1.0 + std::fabs(m(a, b))))
                throw DomainError("Covariance3: matrix is not symmetric");
    return {m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)};
}

Eigen::Matrix3d Covariance3::matrix() const {
    Eigen::Matrix3d m;
    m << s11, s12, s13, s12, s22, s23, s13, s23, s33;
    return m;
}

Covariance2 Covariance2::from_matrix(const Eigen::Matrix2d& m) {
    if (std::fabs(m(0, 1) - m(1, 0)) > kSymTol * (1.0 + std::fabs(m(0, 1))))
        throw DomainError("Covariance2: matrix is not symmetric");
    return {m(0, 0), m(1, 1), m(0, 1)};
}

Eigen::Matrix2d Covariance2::matrix() const {
    Eigen::Matrix2d m;
    m << s11, s12, s12, s22;
    return m;
}

double i3(ActivationKind act, const Covariance3& in) {
    Covariance3 c = in;
    c.s11 = checked_variance(c.s11, "i3");
    c.s22 = checked_variance(c.s22, "i3");
    c.s33 = checked_variance(c.s33, "i3");
    if (act == ActivationKind::Erf) {
        const double a = 1.0 + c.s11;
        const double lambda = a * (1.0 + c.s33) - c.s13 * c.s13;
        if (!(lambda > 0.0)) throw DomainError("i3(erf): non-positive determinant");
        return (2.0 / kPi) * (c.s23 * a - c.s12 * c.s13) / (a * std::sqrt(lambda));
    }
    if (c.s11 == 0.0 || c.s33 == 0.0) return 0.0;
    const double norm = std::sqrt(c.s11 * c.s33);
    const double rho = clamp_unit(c.s13 / norm, "i3(relu)");
    const double root = clamped_sqrt(c.s11 * c.s33 - c.s13 * c.s13, c.s11 * c.s33, "i3(relu)");
    return c.s12 * root / (2.0 * kPi * c.s11) + c.s23 * std::asin(rho) / (2.0 * kPi) + 0.25 * c.s23;
}

double i2(ActivationKind act, const Covariance2& in) {
    Covariance2 c = in;
    c.s11 = checked_variance(c.s11, "i2");
    c.s22 = checked_variance(c.s22, "i2");
    if (act == ActivationKind::Erf) {
        const double rho = clamp_unit(c.s12 / std::sqrt((1.0 + c.s11) * (1.0 + c.s22)), "i2(erf)");
        return (2.0 / kPi) * std::asin(rho);
    }
    if (c.s11 == 0.0 || c.s22 == 0.0) return 0.0;
    const double norm = std::sqrt(c.s11 * c.s22);
    const double cos_phi = clamp_unit(c.s12 / norm, "i2(relu)");
    const double sin_phi = std::sqrt(std::max(0.0, 1.0 - cos_phi * cos_phi));
    const double phi = std::acos(cos_phi);
    return norm * (sin_phi + (kPi - phi) * cos_phi) / (2.0 * kPi);
}

double delta2_perceptron(double q, double r, double t) {
    q = checked_variance(q, "delta2_perceptron");
    t = checked_variance(t, "delta2_perceptron");
    if (r * r > q * t * (1.0 + kSqrtTol) + kVarTol) throw DomainError("delta2_perceptron: r^2 > q t");
    const auto a = ActivationKind::ReLU;
    const double yy = i3(a, {q, r, r, t, t, t});  // ⟨θ(x) y·yθ(y)⟩
    const double xy = i3(a, {q, q, r, q, r, t});  // ⟨θ(x) x·yθ(y)⟩
    const double xx = i3(a, {q, q, q, q, q, q});  // ⟨θ(x) x·xθ(x)⟩
    const double v = yy - 2.0 * xy + xx;
    return v < 0.0 && v > -1e-12 ? 0.0 : v;
}

std::string_view to_string(MomentForm form) {
    switch (form) {
        case MomentForm::I3Relu: return "i3-relu";
        case MomentForm::I3Erf: return "i3-erf";
        case MomentForm::I2Relu: return "i2-relu";
        case MomentForm::I2Erf: return "i2-erf";
        case MomentForm::Delta2Perceptron: return "delta2-perceptron";
    }
    return "?";
}

int dimension(MomentForm form) {
    return (form == MomentForm::I3Relu || form == MomentForm::I3Erf) ? 3 : 2;
}

Eigen::MatrixXd pivoted_cholesky(const Eigen::MatrixXd& cov, double tol) {
    const Eigen::Index n = cov.rows();
    if (cov.cols() != n) throw DomainError("pivoted_cholesky: matrix is not square");
    Eigen::MatrixXd a = cov;
    std::vector<Eigen::Index> perm(n);
    for (Eigen::Index i = 0; i < n; ++i) perm[i] = i;
    const double scale = std::max(cov.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index p = k;
        for (Eigen::Index i = k + 1; i < n; ++i)
            if (a(i, i) > a(p, p)) p = i;
        if (p != k) {
            a.row(k).swap(a.row(p));
            a.col(k).swap(a.col(p));
            l.row(k).swap(l.row(p));
            std::swap(perm[k], perm[p]);
        }
        const double d = a(k, k);
        if (d < -tol * scale) throw DomainError("covariance is not positive semidefinite");
        if (d <= tol * scale) {
            // Remaining Schur complement must vanish for a PSD input.
            for (Eigen::Index i = k; i < n; ++i)
                for (Eigen::Index j = k; j < n; ++j)
                    if (std::fabs(a(i, j)) > std::sqrt(tol) * scale)
                        throw DomainError("covariance is not positive semidefinite");
            break;
        }
        const double s = std::sqrt(d);
        l(k, k) = s;
        for (Eigen::Index i = k + 1; i < n; ++i) l(i, k) = a(i, k) / s;
        for (Eigen::Index i = k + 1; i < n; ++i)
            for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) -= l(i, k) * l(j, k);
    }
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) out.row(perm[i]) = l.row(i);
    return out;
}

McEstimate mc_average(MomentForm form, const Eigen::MatrixXd& cov, std::int64_t n, std::uint64_t seed) {
    if (n < 10000) throw ConfigError("mc_average: need at least 10^4 samples");
    const int dim = dimension(form);
    if (cov.rows() != dim || cov.cols() != dim)
        throw DomainError("mc_average: covariance dimension does not match " + std::string(to_string(form)));
    if (!cov.isApprox(cov.transpose(), 1e-12)) throw DomainError("mc_average: covariance is not symmetric");
    const Eigen::MatrixXd l = pivoted_cholesky(cov);

    GaussianStream stream(seed, 1 + static_cast<std::uint64_t>(form));
    constexpr std::int64_t kBatch = 4096;
    std::vector<double> z(static_cast<std::size_t>(kBatch * dim));

    // Welford accumulation; batching only affects how z is produced.
    double mean = 0.0, m2 = 0.0;
    std::int64_t count = 0;
    for (std::int64_t done = 0; done < n; done += kBatch) {
        const std::int64_t m = std::min(kBatch, n - done);
        stream.fill(std::span<double>(z.data(), static_cast<std::size_t>(m * dim)));
        for (std::int64_t s = 0; s < m; ++s) {
            const double* zs = z.data() + s * dim;
            double x[3] = {0, 0, 0};
            for (int a = 0; a < dim; ++a)
                for (int b = 0; b < dim; ++b) x[a] += l(a, b) * zs[b];
            double f = 0.0;
            switch (form) {
                case MomentForm::I3Relu:
                    f = x[0] > 0.0 ? x[1] * relu(x[2]) : 0.0;
                    break;
                case MomentForm::I3Erf:
                    f = activation_derivative(ActivationKind::Erf, x[0]) * x[1] *
                        activation(ActivationKind::Erf, x[2]);
                    break;
                case MomentForm::I2Relu:
                    f = relu(x[0]) * relu(x[1]);
                    break;
                case MomentForm::I2Erf:
                    f = activation(ActivationKind::Erf, x[0]) * activation(ActivationKind::Erf, x[1]);
                    break;
                case MomentForm::Delta2Perceptron:
                    if (x[0] > 0.0) {
                        const double d = relu(x[1]) - x[0];
                        f = d * d;
                    }
                    break;
            }
            ++count;
            const double delta = f - mean;
            mean += delta / static_cast<double>(count);
            m2 += delta * (f - mean);
        }
    }
    const double var = m2 / static_cast<double>(count - 1);
    return {mean, std::sqrt(var / static_cast<double>(count))};
}

}  // namespace moments
}  // namespace scm
