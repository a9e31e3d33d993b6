#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scmlab/macro.hpp"
#include "scmlab/order_parameters.hpp"

namespace scm::analysis {

/// rhs(state) as a vector in the `flatten` coordinate order.
Eigen::VectorXd flat_rhs(const OrderParameters& state, const NetConfig& cfg);

/// Finite-difference Jacobian of the flow in flat coordinates.
///
/// Away from the boundary of the feasible region (smallest eigenvalue of the
/// joint Gram matrix [[Q, R], [Rᵀ, T]] above 2h) this is the central
/// difference (f(x + h e_j) − f(x − h e_j)) / 2h; a perturbation rejected by a
/// moment kernel halves h, at most 8 times, before a BoundaryError.
///
/// On or near the boundary (e.g. the perfect-student state R = Q = T, where
/// every stencil point on one side is infeasible) the flow is only C¹: the
/// arcsine/square-root terms of i3 contribute a series in powers of √h.
/// There the columns come from one-sided differences along feasible rays
/// ±e_j + κc (c raises every Q_ii), extrapolated in h^{1/2}, h, ..., h^{5/2}.
Eigen::MatrixXd jacobian(const OrderParameters& state, const NetConfig& cfg, double h = 1e-6);

/// Eigen-decomposition sorted by descending real part (ties: descending
/// imaginary part). Each eigenvector has unit 2-norm and is rotated so its
/// largest-modulus component (the first one, among ties within 1e-10) is real
/// and positive.
struct EigenReport {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;  ///< column k pairs with values(k)
    double max_residual = 0;   ///< max_k ‖A v_k − λ_k v_k‖ / ‖A‖

    double leading_real() const { return values(0).real(); }
};

/// Throws NumericalError if the QR iteration does not converge or a pair
/// violates ‖A v − λ v‖ ≤ 1e-8 ‖A‖.
EigenReport eigs(const Eigen::MatrixXd& a);

struct FixedPointResult {
    OrderParameters state;
    int iterations = 0;
    double residual = 0;            ///< ‖rhs‖∞ at `state`
    bool used_pseudo_inverse = false;  ///< a singular Newton system was met
};

/// Raised when Newton does not reach the tolerance; carries the best iterate.
class FixedPointError : public SearchError {
public:
    FixedPointError(const std::string& what, FixedPointResult best)
        : SearchError(what), best_(std::move(best)) {}
    const FixedPointResult& best() const noexcept { return best_; }

private:
    FixedPointResult best_;
};

/// Damped Newton iteration on rhs = 0 using `jacobian`, from `guess`, until
/// ‖rhs‖∞ ≤ tol (at most `max_iterations`). A guess with exact
/// student-permutation symmetry keeps that symmetry at every iterate. The
/// line search halves the step until the trial point is realizable (joint Gram
/// matrix positive semidefinite) and lowers the residual. The symmetric
/// plateau fixed point of K = M = 2 lies on that boundary.
FixedPointResult find_fixed_point(const NetConfig& cfg, const OrderParameters& guess, double tol = 1e-12,
                                  int max_iterations = 200);

/// Largest real part of the Jacobian spectrum at `fp`.
double stability_indicator(const OrderParameters& fp, const NetConfig& cfg);

/// Learning rate at which `stability_indicator(fp, cfg with eta)` changes
/// sign, by bisection on [lo, hi] to absolute tolerance `tol`.
/// Throws BracketError when both ends have the same sign.
double critical_learning_rate(const NetConfig& cfg, const OrderParameters& fp, std::pair<double, double> bracket,
                              double tol = 1e-4);

struct Plateau {
    double alpha_start = 0;
    double alpha_end = 0;
    double eps_g = 0;   ///< mean ε_g over the interval
    double mean_R = 0;  ///< mean of all R_in over the interval
};

/// Maximal runs of consecutive samples with |Δε_g/Δα| < slope_tol whose
/// ε_g exceeds the final value by more than 10·slope_tol·window, kept when
/// they span at least `window` in α. Sorted and disjoint.
std::vector<Plateau> detect_plateau(const Trajectory& traj, double window = 50.0, double slope_tol = 1e-5);

/// Angle in degrees between two real directions, ignoring sign.
double direction_angle_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace scm::analysis
