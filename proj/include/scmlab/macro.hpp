#pragma once

#include <vector>

#include <Eigen/Core>

#include "scmlab/errors.hpp"
#include "scmlab/order_parameters.hpp"

namespace scm {

/// Right-hand side of the order-parameter flow: dR/dα and dQ/dα.
struct StateDerivative {
    Eigen::MatrixXd dR;
    Eigen::MatrixXd dQ;

    double max_abs() const;
};

struct TrajectorySample {
    double alpha = 0;
    OrderParameters state;
    double eps_g = 0;
};

enum class TrajectorySource { Ode, Sim };
std::string_view to_string(TrajectorySource s);

/// Sampled (α, state, ε_g) sequence plus the settings that produced it.
/// For ODE trajectories `step` is the integrator step and `stride` counts
/// integrator steps per sample; for simulations `step` is 1/N and `stride`
/// counts SGD steps per sample.
struct Trajectory {
    NetConfig config;
    OrderParameters initial;
    double step = 0;
    long long stride = 1;
    TrajectorySource source = TrajectorySource::Ode;
    std::vector<TrajectorySample> samples;

    const TrajectorySample& back() const { return samples.back(); }
};

/// State invariants failed mid-trajectory.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double alpha)
        : Error(what + " at alpha=" + std::to_string(alpha)), alpha_(alpha) {}
    double alpha() const noexcept { return alpha_; }

private:
    double alpha_;
};

/// Non-finite values appeared; `last()` is the last finite sample.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, TrajectorySample last)
        : Error(what + " (last finite alpha=" + std::to_string(last.alpha) + ")"), last_(std::move(last)) {}
    const TrajectorySample& last() const noexcept { return last_; }

private:
    TrajectorySample last_;
};

namespace macro {

/// dR_in = η ⟨δ_i y_n⟩ and dQ_ik = η(⟨δ_i x_k⟩ + ⟨δ_k x_i⟩) [+ η² ⟨δ²⟩ for the
/// perceptron], every average expanded into `moments::i3` terms over the
/// joint covariance [[Q, R], [Rᵀ, T]]. dQ is symmetric by construction.
StateDerivative rhs(const OrderParameters& state, const NetConfig& cfg);

/// ε_g = ½ ⟨(σ − τ)²⟩ from the pairwise `moments::i2` terms. Values in
/// [-1e-12, 0) are clamped to 0.
double gen_error(const OrderParameters& state, const NetConfig& cfg);

struct StepControl {
    double h = 0.01;
};

/// Classical fixed-step RK4 from α = 0 to `alpha_max`, sampling every `stride`
/// steps plus the final step. The last step is shortened so the trajectory
/// ends exactly at `alpha_max`.
Trajectory integrate(const OrderParameters& state0, const NetConfig& cfg, double alpha_max,
                     StepControl step = {}, long long stride = 100);

}  // namespace macro
}  // namespace scm
