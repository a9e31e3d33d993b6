#include "scmlab/macro.hpp"

#include <cmath>

namespace scm {

double StateDerivative::max_abs() const {
    return std::max(dR.cwiseAbs().maxCoeff(), dQ.cwiseAbs().maxCoeff());
}

std::string_view to_string(TrajectorySource s) { return s == TrajectorySource::Ode ? "ode" : "sim"; }

namespace macro {

namespace {

// Joint covariance of (x_1..x_K, y_1..y_M).
Eigen::MatrixXd joint_covariance(const OrderParameters& s) {
    const Eigen::Index k = s.Q.rows(), m = s.T.rows();
    Eigen::MatrixXd c(k + m, k + m);
    c.topLeftCorner(k, k) = s.Q;
    c.topRightCorner(k, m) = s.R;
    c.bottomLeftCorner(m, k) = s.R.transpose();
    c.bottomRightCorner(m, m) = s.T;
    return c;
}

inline double i3_at(ActivationKind act, const Eigen::MatrixXd& c, Eigen::Index a, Eigen::Index b, Eigen::Index d) {
    return moments::i3(act, {c(a, a), c(a, b), c(a, d), c(b, b), c(b, d), c(d, d)});
}

void check_config(const OrderParameters& s, const NetConfig& cfg) {
    cfg.validate();
    s.check_shapes();
    if (s.students() != cfg.K || s.teachers() != cfg.M)
        throw ConfigError("state shape " + std::to_string(s.students()) + "x" + std::to_string(s.teachers()) +
                          " does not match K=" + std::to_string(cfg.K) + ", M=" + std::to_string(cfg.M));
}

}  // namespace

StateDerivative rhs(const OrderParameters& state, const NetConfig& cfg) {
    check_config(state, cfg);
    const Eigen::Index k = cfg.K, m = cfg.M;
    const Eigen::MatrixXd c = joint_covariance(state);

    // drift(i, v) = ⟨δ_i z_v⟩ for every pre-activation z_v, students first.
    Eigen::MatrixXd drift(k, k + m);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index v = 0; v < k + m; ++v) {
            double acc = 0.0;
            for (Eigen::Index t = 0; t < m; ++t) acc += i3_at(cfg.activation, c, i, v, k + t);
            for (Eigen::Index j = 0; j < k; ++j) acc -= i3_at(cfg.activation, c, i, v, j);
            drift(i, v) = acc;
        }
    }

    StateDerivative d;
    d.dR = cfg.eta * drift.rightCols(m);
    const Eigen::MatrixXd p = drift.leftCols(k);
    d.dQ = cfg.eta * (p + p.transpose());
    if (cfg.eta2_mode == Eta2Mode::PerceptronExact)
        d.dQ(0, 0) += cfg.eta * cfg.eta * moments::delta2_perceptron(state.Q(0, 0), state.R(0, 0), state.T(0, 0));
    return d;
}

double gen_error(const OrderParameters& state, const NetConfig& cfg) {
    check_config(state, cfg);
    const auto act = cfg.activation;
    const Eigen::Index k = cfg.K, m = cfg.M;
    // Full ordered-pair sums so a perfect student gives three identical sums
    // and ε_g = 0 exactly.
    double ss = 0.0, st = 0.0, tt = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j)
            ss += moments::i2(act, {state.Q(i, i), state.Q(j, j), state.Q(i, j)});
        for (Eigen::Index n = 0; n < m; ++n)
            st += moments::i2(act, {state.Q(i, i), state.T(n, n), state.R(i, n)});
    }
    for (Eigen::Index n = 0; n < m; ++n)
        for (Eigen::Index p = 0; p < m; ++p)
            tt += moments::i2(act, {state.T(n, n), state.T(p, p), state.T(n, p)});
    const double e = 0.5 * (ss - 2.0 * st + tt);
    if (e < 0.0 && e >= -1e-12) return 0.0;
    return e;
}

namespace {

OrderParameters advance(const OrderParameters& s, const StateDerivative& d, double h) {
    OrderParameters out = s;
    out.R += h * d.dR;
    out.Q += h * d.dQ;
    return out;
}

bool finite(const OrderParameters& s) { return s.R.allFinite() && s.Q.allFinite(); }

OrderParameters rk4_step(const OrderParameters& s, const NetConfig& cfg, double h) {
    const StateDerivative k1 = rhs(s, cfg);
    const StateDerivative k2 = rhs(advance(s, k1, 0.5 * h), cfg);
    const StateDerivative k3 = rhs(advance(s, k2, 0.5 * h), cfg);
    const StateDerivative k4 = rhs(advance(s, k3, h), cfg);
    OrderParameters out = s;
    out.R += (h / 6.0) * (k1.dR + 2.0 * k2.dR + 2.0 * k3.dR + k4.dR);
    out.Q += (h / 6.0) * (k1.dQ + 2.0 * k2.dQ + 2.0 * k3.dQ + k4.dQ);
    return out;
}

// Cauchy–Schwarz slack is judged relative to the size of the state.
double scaled_violation(const OrderParameters& s) {
    const double scale = std::max(1.0, s.Q.diagonal().maxCoeff() * s.T.diagonal().maxCoeff());
    return s.invariant_violation() / scale;
}

}  // namespace

Trajectory integrate(const OrderParameters& state0, const NetConfig& cfg, double alpha_max, StepControl step,
                     long long stride) {
    check_config(state0, cfg);
    if (!(alpha_max > 0.0)) throw ConfigError("integrate: alpha_max must be positive");
    if (!(step.h > 0.0)) throw ConfigError("integrate: step must be positive");
    if (stride < 1) throw ConfigError("integrate: stride must be >= 1");
    state0.validate();

    Trajectory traj;
    traj.config = cfg;
    traj.initial = state0;
    traj.step = step.h;
    traj.stride = stride;
    traj.source = TrajectorySource::Ode;

    const long long n = static_cast<long long>(std::ceil(alpha_max / step.h - 1e-9));
    OrderParameters s = state0;
    traj.samples.push_back({0.0, s, gen_error(s, cfg)});

    for (long long k = 1; k <= n; ++k) {
        const double alpha = k == n ? alpha_max : static_cast<double>(k) * step.h;
        const double h = k == n ? alpha_max - static_cast<double>(n - 1) * step.h : step.h;
        OrderParameters next;
        try {
            next = rk4_step(s, cfg, h);
        } catch (const DomainError& e) {
            if (!finite(s)) throw DivergenceError("state diverged", traj.samples.back());
            throw IntegrationError(std::string("moment kernel rejected the state: ") + e.what(), alpha);
        }
        if (!finite(next)) throw DivergenceError("non-finite state", traj.samples.back());
        s = std::move(next);
        if (k % stride == 0 || k == n) {
            s.symmetrize();
            const double v = scaled_violation(s);
            if (v > 1e-8) throw IntegrationError("order-parameter invariant violated by " + std::to_string(v), alpha);
            const double e = gen_error(s, cfg);
            if (!std::isfinite(e)) throw DivergenceError("non-finite generalization error", traj.samples.back());
            traj.samples.push_back({alpha, s, e});
        }
    }
    return traj;
}

}  // namespace macro
}  // namespace scm
