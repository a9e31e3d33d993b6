#include "scmlab/order_parameters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scmlab/errors.hpp"

namespace scm {

OrderParameters::OrderParameters(Eigen::MatrixXd r, Eigen::MatrixXd q, Eigen::MatrixXd t)
    : R(std::move(r)), Q(std::move(q)), T(std::move(t)) {
    check_shapes();
}

OrderParameters OrderParameters::zeros(int k, int m) {
    return {Eigen::MatrixXd::Zero(k, m), Eigen::MatrixXd::Zero(k, k), Eigen::MatrixXd::Identity(m, m)};
}

void OrderParameters::check_shapes() const {
    if (R.rows() < 1 || R.cols() < 1) throw ConfigError("OrderParameters: empty R");
    if (Q.rows() != R.rows() || Q.cols() != R.rows())
        throw ConfigError("OrderParameters: Q must be K x K with K = rows(R)");
    if (T.rows() != R.cols() || T.cols() != R.cols())
        throw ConfigError("OrderParameters: T must be M x M with M = cols(R)");
}

double OrderParameters::invariant_violation() const {
    double worst = 0.0;
    auto bump = [&](double v) {
        if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
        worst = std::max(worst, v);
    };
    const Eigen::Index k = Q.rows(), m = T.rows();
    for (Eigen::Index i = 0; i < k; ++i) {
        bump(-Q(i, i));
        for (Eigen::Index j = 0; j < k; ++j) {
            bump(std::fabs(Q(i, j) - Q(j, i)));
            bump(Q(i, j) * Q(i, j) - Q(i, i) * Q(j, j));
        }
        for (Eigen::Index n = 0; n < m; ++n) bump(R(i, n) * R(i, n) - Q(i, i) * T(n, n));
    }
    for (Eigen::Index n = 0; n < m; ++n) {
        bump(-T(n, n));
        for (Eigen::Index p = 0; p < m; ++p) bump(std::fabs(T(n, p) - T(p, n)));
    }
    return worst;
}

void OrderParameters::validate(double tol) const {
    check_shapes();
    const double v = invariant_violation();
    if (v > tol) throw DomainError("OrderParameters: invariant violated by " + std::to_string(v));
}

void OrderParameters::symmetrize() {
    Q = 0.5 * (Q + Q.transpose()).eval();
    T = 0.5 * (T + T.transpose()).eval();
}

std::string_view to_string(Eta2Mode mode) {
    return mode == Eta2Mode::Off ? "off" : "perceptron";
}

Eta2Mode parse_eta2_mode(std::string_view name) {
    if (name == "off") return Eta2Mode::Off;
    if (name == "perceptron") return Eta2Mode::PerceptronExact;
    throw ConfigError("unknown eta2 mode '" + std::string(name) + "' (expected off or perceptron)");
}

void NetConfig::validate() const {
    if (K < 1 || M < 1) throw ConfigError("NetConfig: K and M must be positive");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("NetConfig: eta must be positive");
    if (eta2_mode == Eta2Mode::PerceptronExact && (K != 1 || M != 1 || activation != ActivationKind::ReLU))
        throw ConfigError("NetConfig: eta2 = perceptron requires K = M = 1 and ReLU");
}

int flat_size(int k, int m) { return k * m + k * (k + 1) / 2; }

Eigen::VectorXd flatten(const OrderParameters& s) {
    const int k = s.students(), m = s.teachers();
    Eigen::VectorXd x(flat_size(k, m));
    int p = 0;
    for (int i = 0; i < k; ++i)
        for (int n = 0; n < m; ++n) x(p++) = s.R(i, n);
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) x(p++) = s.Q(i, j);
    return x;
}

OrderParameters unflatten(const Eigen::VectorXd& x, const OrderParameters& like) {
    const int k = like.students(), m = like.teachers();
    if (x.size() != flat_size(k, m)) throw ConfigError("unflatten: wrong coordinate count");
    OrderParameters s = like;
    int p = 0;
    for (int i = 0; i < k; ++i)
        for (int n = 0; n < m; ++n) s.R(i, n) = x(p++);
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) {
            s.Q(i, j) = x(p);
            s.Q(j, i) = x(p++);
        }
    return s;
}

std::vector<std::string> flat_names(int k, int m) {
    std::vector<std::string> names;
    for (int i = 1; i <= k; ++i)
        for (int n = 1; n <= m; ++n) names.push_back("R_" + std::to_string(i) + "_" + std::to_string(n));
    for (int i = 1; i <= k; ++i)
        for (int j = i; j <= k; ++j) names.push_back("Q_" + std::to_string(i) + "_" + std::to_string(j));
    return names;
}

bool has_student_permutation_symmetry(const OrderParameters& s) {
    const Eigen::Index k = s.Q.rows();
    for (Eigen::Index i = 1; i < k; ++i) {
        if (s.R.row(i) != s.R.row(0)) return false;
        if (s.Q(i, i) != s.Q(0, 0)) return false;
    }
    if (k > 1) {
        const double off = s.Q(0, 1);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j)
                if (i != j && s.Q(i, j) != off) return false;
    }
    return true;
}

OrderParameters symmetrize_students(const OrderParameters& s) {
    OrderParameters out = s;
    const Eigen::Index k = s.Q.rows();
    const Eigen::RowVectorXd row = s.R.colwise().mean();
    for (Eigen::Index i = 0; i < k; ++i) out.R.row(i) = row;
    const double diag = s.Q.diagonal().mean();
    const double off = k > 1 ? (s.Q.sum() - s.Q.trace()) / static_cast<double>(k * (k - 1)) : 0.0;
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) out.Q(i, j) = i == j ? diag : off;
    return out;
}

}  // namespace scm
