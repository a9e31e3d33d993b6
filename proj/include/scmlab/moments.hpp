#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace scm {

/// Hidden-unit activation.
///
///  - `ReLU`: g(x) = x θ(x), with g'(x) = θ(x) and the convention θ(0) = 0.
///  - `Erf`:  g(x) = erf(x / √2), so g'(x) = √(2/π) exp(-x²/2). This is the
///    normalization under which the classic sigmoidal soft-committee closed
///    forms are written; curves for other scalings (e.g. erf(x)) differ.
enum class ActivationKind { ReLU, Erf };

std::string_view to_string(ActivationKind act);
ActivationKind parse_activation(std::string_view name);

double activation(ActivationKind act, double x) noexcept;
double activation_derivative(ActivationKind act, double x) noexcept;

namespace moments {

/// Covariance of a zero-mean Gaussian triple (u, v, w).
struct Covariance3 {
    double s11 = 0, s12 = 0, s13 = 0, s22 = 0, s23 = 0, s33 = 0;

    /// Builds from a full matrix; throws DomainError if it is not symmetric.
    static Covariance3 from_matrix(const Eigen::Matrix3d& m);
    Eigen::Matrix3d matrix() const;
};

/// Covariance of a zero-mean Gaussian pair (u, v).
struct Covariance2 {
    double s11 = 0, s22 = 0, s12 = 0;

    static Covariance2 from_matrix(const Eigen::Matrix2d& m);
    Eigen::Matrix2d matrix() const;
};

/// Three-variable average ⟨g'(u) v g(w)⟩.
///
/// For ReLU this is ⟨θ(u) v w θ(w)⟩ =
///   σ12 √(σ11σ33 − σ13²) / (2π σ11) + σ23 asin(σ13 / √(σ11σ33)) / (2π) + σ23 / 4.
/// The square-root argument is clamped at 0 when above -2e-9 σ11σ33 and the
/// arcsine argument clamped to [-1, 1] when within 1e-9 of it; anything worse
/// is a DomainError. Variances in (-1e-12, 0) are read as 0 (both kernels).
/// A zero-variance u or w gives 0 (θ(0) = 0, w θ(w) ≡ 0).
///
/// For Erf: (2/π) (σ23 (1 + σ11) − σ12 σ13) / ((1 + σ11) √((1 + σ11)(1 + σ33) − σ13²)).
double i3(ActivationKind act, const Covariance3& c);

/// Two-variable average ⟨g(u) g(v)⟩.
///
/// ReLU: first-order arc-cosine kernel √(σ11σ22) (sin φ + (π − φ) cos φ) / (2π)
/// with cos φ = σ12 / √(σ11σ22).  Erf: (2/π) asin(σ12 / √((1 + σ11)(1 + σ22))).
double i2(ActivationKind act, const Covariance2& c);

/// ⟨δ²⟩ for a single ReLU student/teacher pair, δ = (g(y) − g(x)) θ(x), where
/// ⟨x²⟩ = q, ⟨xy⟩ = r, ⟨y²⟩ = t. Throws DomainError if
/// r² > q t (1 + 2e-9) + 1e-12.
double delta2_perceptron(double q, double r, double t);

/// Integrands the Monte-Carlo oracle can average.
enum class MomentForm { I3Relu, I3Erf, I2Relu, I2Erf, Delta2Perceptron };

std::string_view to_string(MomentForm form);
/// Dimension of the Gaussian vector the form integrates over (3 or 2).
int dimension(MomentForm form);

struct McEstimate {
    double mean = 0;
    double stderr_mean = 0;
};

/// Monte-Carlo estimate of the form's average under N(0, cov).
///
/// For `Delta2Perceptron` the covariance is that of (x, y). Samples are drawn
/// as L z with L a pivoted Cholesky factor of `cov` and z from
/// GaussianStream(seed, 1 + form index), so results are bit-reproducible for a
/// fixed (form, cov, n, seed). Requires n ≥ 10⁴; a covariance that is not PSD
/// (pivot below -1e-10 times its largest diagonal) is a DomainError.
McEstimate mc_average(MomentForm form, const Eigen::MatrixXd& cov, std::int64_t n, std::uint64_t seed);

/// L with L Lᵀ = cov from Cholesky with diagonal pivoting (lower triangular
/// up to the pivot row permutation).
/// Rank-deficient input is accepted; indefinite input throws DomainError.
Eigen::MatrixXd pivoted_cholesky(const Eigen::MatrixXd& cov, double tol = 1e-10);

}  // namespace moments
}  // namespace scm
