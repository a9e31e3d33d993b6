#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "scmlab/macro.hpp"
#include "scmlab/moments.hpp"
#include "scmlab/order_parameters.hpp"

namespace scm::micro {

using WeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Finite-N student/teacher pair trained by on-line SGD.
///
/// Inputs ξ ∈ R^N have i.i.d. N(0, 1) components, so the pre-activations
/// x_i = J_i·ξ and y_n = B_n·ξ have covariance [[Q, R], [Rᵀ, T]].
struct MicroSystem {
    WeightMatrix B;  ///< M×N teacher, orthonormal rows
    WeightMatrix J;  ///< K×N student
    int N = 0;
    std::uint64_t rng_seed = 0;
    double eta = 0.1;
    ActivationKind activation = ActivationKind::ReLU;
    long long steps_done = 0;

    int students() const { return static_cast<int>(J.rows()); }
    int teachers() const { return static_cast<int>(B.rows()); }
};

struct SimConfig {
    int N = 1000;
    int K = 1;
    int M = 1;
    double eta = 0.1;
    long long steps = 1;           ///< total examples presented
    long long measure_stride = 100;  ///< SGD steps between recorded samples
    std::uint64_t seed = 1;
    ActivationKind activation = ActivationKind::ReLU;
    bool allow_small_n = false;  ///< permit N < 100

    /// Throws ConfigError on non-positive sizes, η ≤ 0, steps or stride < 1,
    /// or N < 100 without `allow_small_n`.
    void validate() const;
};

/// Stream ids under the run seed; examples for step μ are samples
/// [μN, (μ+1)N) of the example stream.
inline constexpr std::uint64_t kTeacherStream = 1001;
inline constexpr std::uint64_t kStudentStream = 1002;
inline constexpr std::uint64_t kExampleStream = 1003;
inline constexpr std::uint64_t kTestStream = 1004;

/// Raised by `sgd_step` when the weights stop being finite.
class StepDivergenceError : public Error {
public:
    StepDivergenceError(const std::string& what, long long step)
        : Error(what + " at step " + std::to_string(step)), step_(step) {}
    long long step() const noexcept { return step_; }

private:
    long long step_;
};

/// M×N matrix of Gaussian rows from GaussianStream(seed, kTeacherStream),
/// orthonormalized by modified Gram–Schmidt applied twice.
/// Throws ConfigError if M > N.
WeightMatrix init_teacher(int M, int N, std::uint64_t seed);

/// K×N student with J Bᵀ = target.R and J Jᵀ = target.Q.
///
/// J = R T⁻¹ B + L E, where L Lᵀ = Q − R T⁻¹ Rᵀ (pivoted Cholesky) and the rows
/// of E are orthonormal, orthogonal to span(B), and drawn from
/// GaussianStream(seed, kStudentStream). Throws ConfigError if the residual
/// Gram matrix is not PSD, if K + M > N, or if target.T differs from B Bᵀ.
WeightMatrix init_student(int K, int N, const OrderParameters& target, const WeightMatrix& B, std::uint64_t seed);

/// J_i ← J_i + (η/N) δ_i ξ with δ_i = (τ − σ) g'(x_i), τ = Σ_n g(y_n),
/// σ = Σ_j g(x_j). Throws StepDivergenceError (carrying sys.steps_done) if
/// the result is not finite.
void sgd_step(MicroSystem& sys, const Eigen::Ref<const Eigen::VectorXd>& xi);

/// R = J Bᵀ, Q = J Jᵀ, T = B Bᵀ with Q and T symmetrized.
OrderParameters measure(const MicroSystem& sys);

/// Teacher and student realizing `initial` at dimension cfg.N, both seeded
/// from cfg.seed.
MicroSystem make_system(const SimConfig& cfg, const OrderParameters& initial);

/// Runs cfg.steps SGD steps from `initial`, recording a sample at μ = 0,
/// every measure_stride steps and at the end, with α = μ/N and ε_g from
/// `macro::gen_error` on the measured state. Deterministic per seed.
/// A non-finite update becomes a DivergenceError with the last sample.
Trajectory run(const SimConfig& cfg, const OrderParameters& initial);

/// Direct estimate of ½⟨(σ − τ)²⟩ over `n` fresh inputs from
/// GaussianStream(seed, kTestStream). A cross-check for the analytic ε_g.
moments::McEstimate test_set_error(const MicroSystem& sys, long long n, std::uint64_t seed);

/// Empirical single-step drift: mean and standard error of N·ΔR and N·ΔQ in
/// `flatten` order over `samples` independent SGD steps, each applied to the
/// same system realizing `state` with a fresh input.
struct DriftEstimate {
    Eigen::VectorXd mean;
    Eigen::VectorXd stderr_mean;
};
DriftEstimate empirical_drift(const OrderParameters& state, const SimConfig& cfg, long long samples);

}  // namespace scm::micro
