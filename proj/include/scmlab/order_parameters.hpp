#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "scmlab/moments.hpp"

namespace scm {

/// Macroscopic state of a student/teacher pair of soft committee machines.
///
/// R(i, n) = J_i·B_n (K×M), Q(i, k) = J_i·J_k (K×K), T(n, m) = B_n·B_m (M×M).
/// T is fixed by the teacher and defaults to the identity.
struct OrderParameters {
    Eigen::MatrixXd R;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd T;

    OrderParameters() = default;
    OrderParameters(Eigen::MatrixXd r, Eigen::MatrixXd q, Eigen::MatrixXd t);
    /// All-zero R and Q with T = identity.
    static OrderParameters zeros(int k, int m);

    int students() const { return static_cast<int>(R.rows()); }
    int teachers() const { return static_cast<int>(R.cols()); }

    /// Throws ConfigError on inconsistent shapes.
    void check_shapes() const;

    /// Largest violation of the state invariants (symmetry of Q and T,
    /// nonnegative diagonals, Cauchy–Schwarz on every R and Q entry). Zero for a
    /// valid state.
    double invariant_violation() const;

    /// `check_shapes` plus `invariant_violation() <= tol`, else DomainError.
    void validate(double tol = 1e-8) const;

    void symmetrize();
};

/// How the O(η²) contribution to dQ/dα is treated.
///  - Off: dropped (small-η dynamics).
///  - PerceptronExact: the exact closed form, available for K = M = 1 with ReLU.
enum class Eta2Mode { Off, PerceptronExact };

std::string_view to_string(Eta2Mode mode);
Eta2Mode parse_eta2_mode(std::string_view name);

struct NetConfig {
    int K = 1;
    int M = 1;
    double eta = 0.1;
    ActivationKind activation = ActivationKind::ReLU;
    Eta2Mode eta2_mode = Eta2Mode::Off;

    /// Throws ConfigError if η ≤ 0, K or M < 1, or PerceptronExact is requested
    /// for anything other than a single ReLU unit on each side.
    void validate() const;
};

/// Free coordinates of an OrderParameters in the fixed public order: R
/// row-major, then the upper triangle of Q row-major. T is not included.
/// For K = M = 2 this is (R11, R12, R21, R22, Q11, Q12, Q22).
Eigen::VectorXd flatten(const OrderParameters& state);
/// Inverse of `flatten`; T is taken from `like`.
OrderParameters unflatten(const Eigen::VectorXd& x, const OrderParameters& like);
int flat_size(int k, int m);
/// Coordinate names in flat order, 1-based: "R_1_1", ..., "Q_1_1", ...
std::vector<std::string> flat_names(int k, int m);

/// True when all rows of R are identical and Q has equal diagonal and equal
/// off-diagonal entries (exact comparison).
bool has_student_permutation_symmetry(const OrderParameters& s);
/// Projects onto the student-permutation-symmetric subspace by averaging.
OrderParameters symmetrize_students(const OrderParameters& s);

}  // namespace scm
