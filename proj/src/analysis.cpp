#include "scmlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

namespace scm::analysis {

namespace {

Eigen::MatrixXd joint_gram(const OrderParameters& s) {
    const Eigen::Index k = s.Q.rows(), m = s.T.rows();
    Eigen::MatrixXd g(k + m, k + m);
    g << s.Q, s.R, s.R.transpose(), s.T;
    return g;
}

double gram_min_eigenvalue(const OrderParameters& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(joint_gram(s), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

Eigen::VectorXd flat_derivative(const StateDerivative& d) {
    const Eigen::Index k = d.dQ.rows(), m = d.dR.cols();
    Eigen::VectorXd v(k * m + k * (k + 1) / 2);
    Eigen::Index p = 0;
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index n = 0; n < m; ++n) v(p++) = d.dR(i, n);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i; j < k; ++j) v(p++) = d.dQ(i, j);
    return v;
}

Eigen::MatrixXd central_jacobian(const Eigen::VectorXd& x, const OrderParameters& like, const NetConfig& cfg,
                                 double h) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd jac(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double hj = h;
        for (int attempt = 0;; ++attempt) {
            try {
                Eigen::VectorXd xp = x, xm = x;
                xp(j) += hj;
                xm(j) -= hj;
                jac.col(j) = (flat_rhs(unflatten(xp, like), cfg) - flat_rhs(unflatten(xm, like), cfg)) / (2.0 * hj);
                break;
            } catch (const DomainError& e) {
                if (attempt == 8)
                    throw BoundaryError("jacobian: stencil leaves the kernel domain in coordinate " +
                                        std::to_string(j) + " after 8 step halvings: " + e.what());
                hj *= 0.5;
            }
        }
    }
    return jac;
}

struct Infeasible {};

// One-sided derivative along d, extrapolated over h0/4^k assuming an error
// series in powers of √h.
Eigen::VectorXd ray_derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& f0, const Eigen::VectorXd& d,
                               const OrderParameters& like, const NetConfig& cfg, double h0, double psd_tol) {
    constexpr int kLevels = 6;
    std::vector<std::vector<Eigen::VectorXd>> t(kLevels);
    double h = h0;
    for (int k = 0; k < kLevels; ++k, h *= 0.25) {
        const OrderParameters s = unflatten(x + h * d, like);
        if (gram_min_eigenvalue(s) < -psd_tol) throw Infeasible{};
        Eigen::VectorXd f;
        try {
            f = flat_rhs(s, cfg);
        } catch (const DomainError&) {
            throw Infeasible{};
        }
        t[k].push_back((f - f0) / h);
    }
    for (int m = 1; m < kLevels; ++m) {
        const double w = std::ldexp(1.0, m);  // 4^{m/2}
        for (int k = m; k < kLevels; ++k) t[k].push_back((w * t[k][m - 1] - t[k - 1][m - 1]) / (w - 1.0));
    }
    return t[kLevels - 1][kLevels - 1];
}

Eigen::MatrixXd boundary_jacobian(const Eigen::VectorXd& x, const OrderParameters& like, const NetConfig& cfg) {
    const Eigen::Index n = x.size();
    const int k = like.students(), m = like.teachers();
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    const double h0 = 1e-3 * scale;
    const double psd_tol = 1e-12 * scale;
    const Eigen::VectorXd f0 = flat_rhs(unflatten(x, like), cfg);

    Eigen::VectorXd inward = Eigen::VectorXd::Zero(n);
    Eigen::Index p = k * m;
    for (int i = 0; i < k; ++i) {
        inward(p) = 1.0;
        p += k - i;
    }

    Eigen::MatrixXd jac(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        bool done = false;
        for (double kappa = 2.0; kappa <= 1024.0 && !done; kappa *= 2.0) {
            Eigen::VectorXd up = kappa * inward, down = kappa * inward;
            up(j) += 1.0;
            down(j) -= 1.0;
            try {
                jac.col(j) = 0.5 * (ray_derivative(x, f0, up, like, cfg, h0, psd_tol) -
                                    ray_derivative(x, f0, down, like, cfg, h0, psd_tol));
                done = true;
            } catch (const Infeasible&) {
            }
        }
        if (!done)
            throw BoundaryError("jacobian: no feasible one-sided stencil for coordinate " + std::to_string(j));
    }
    return jac;
}

}  // namespace

Eigen::VectorXd flat_rhs(const OrderParameters& state, const NetConfig& cfg) {
    return flat_derivative(macro::rhs(state, cfg));
}

Eigen::MatrixXd jacobian(const OrderParameters& state, const NetConfig& cfg, double h) {
    if (!(h > 0.0)) throw ConfigError("jacobian: step must be positive");
    state.check_shapes();
    const Eigen::VectorXd x = flatten(state);
    if (gram_min_eigenvalue(state) > 2.0 * h) return central_jacobian(x, state, cfg, h);
    return boundary_jacobian(x, state, cfg);
}

EigenReport eigs(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw ConfigError("eigs: matrix is not square");
    if (a.rows() > 50) throw ConfigError("eigs: dimension above 50");
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
    if (es.info() != Eigen::Success) throw NumericalError("eigs: QR iteration did not converge");

    const Eigen::VectorXcd vals = es.eigenvalues();
    const Eigen::MatrixXcd vecs = es.eigenvectors();
    const Eigen::Index n = a.rows();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) {
        if (vals(l).real() != vals(r).real()) return vals(l).real() > vals(r).real();
        return vals(l).imag() > vals(r).imag();
    });

    EigenReport rep;
    rep.values.resize(n);
    rep.vectors.resize(n, n);
    const double norm_a = a.norm();
    const Eigen::MatrixXcd ac = a.cast<std::complex<double>>();
    for (Eigen::Index c = 0; c < n; ++c) {
        const Eigen::Index src = order[c];
        Eigen::VectorXcd v = vecs.col(src);
        v /= v.norm();
        // first component within rounding of the largest modulus, so ties are stable
        const double vmax = v.cwiseAbs().maxCoeff();
        Eigen::Index big = 0;
        while (std::abs(v(big)) < vmax - 1e-10) ++big;
        v *= std::conj(v(big)) / std::abs(v(big));
        v(big) = std::abs(v(big));
        rep.values(c) = vals(src);
        rep.vectors.col(c) = v;
        const double res = norm_a > 0.0 ? (ac * v - vals(src) * v).norm() / norm_a : 0.0;
        rep.max_residual = std::max(rep.max_residual, res);
    }
    if (!(rep.max_residual <= 1e-8))
        throw NumericalError("eigs: eigenpair residual " + std::to_string(rep.max_residual) + " exceeds 1e-8");
    return rep;
}

FixedPointResult find_fixed_point(const NetConfig& cfg, const OrderParameters& guess, double tol,
                                  int max_iterations) {
    if (!(tol > 0.0)) throw ConfigError("find_fixed_point: tolerance must be positive");
    guess.validate();
    if (gram_min_eigenvalue(guess) < -1e-10)
        throw DomainError("find_fixed_point: guess is not realizable (joint Gram matrix is not positive semidefinite)");
    const bool symmetric = has_student_permutation_symmetry(guess);

    FixedPointResult cur;
    cur.state = guess;
    Eigen::VectorXd f = flat_rhs(cur.state, cfg);
    cur.residual = f.cwiseAbs().maxCoeff();

    while (cur.residual > tol) {
        if (cur.iterations >= max_iterations)
            throw FixedPointError("find_fixed_point: no convergence in " + std::to_string(max_iterations) +
                                      " iterations (residual " + std::to_string(cur.residual) + ")",
                                  cur);
        const Eigen::MatrixXd jac = jacobian(cur.state, cfg);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        Eigen::VectorXd dx;
        if (lu.isInvertible() && lu.rcond() > 1e-14) {
            dx = lu.solve(-f);
        } else {
            dx = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(jac).solve(-f);
            cur.used_pseudo_inverse = true;
        }

        const Eigen::VectorXd x = flatten(cur.state);
        bool accepted = false;
        for (double t = 1.0; t > 1e-10 && !accepted; t *= 0.5) {
            OrderParameters trial = unflatten(x + t * dx, cur.state);
            if (symmetric) trial = symmetrize_students(trial);
            if (trial.invariant_violation() > 1e-10 || gram_min_eigenvalue(trial) < -1e-12) continue;
            Eigen::VectorXd ft;
            try {
                ft = flat_rhs(trial, cfg);
            } catch (const DomainError&) {
                continue;
            }
            const double rt = ft.cwiseAbs().maxCoeff();
            if (rt < cur.residual) {
                cur.state = std::move(trial);
                f = std::move(ft);
                cur.residual = rt;
                accepted = true;
            }
        }
        ++cur.iterations;
        if (!accepted)
            throw FixedPointError("find_fixed_point: line search stalled (residual " + std::to_string(cur.residual) +
                                      ")",
                                  cur);
    }
    return cur;
}

double stability_indicator(const OrderParameters& fp, const NetConfig& cfg) {
    return eigs(jacobian(fp, cfg)).leading_real();
}

double critical_learning_rate(const NetConfig& cfg, const OrderParameters& fp, std::pair<double, double> bracket,
                              double tol) {
    auto [lo, hi] = bracket;
    if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("critical_learning_rate: need 0 < lo < hi");
    auto at = [&](double eta) {
        NetConfig c = cfg;
        c.eta = eta;
        if (flat_rhs(fp, c).cwiseAbs().maxCoeff() > 1e-8)
            throw ConfigError("critical_learning_rate: state is not a fixed point at eta=" + std::to_string(eta));
        return stability_indicator(fp, c);
    };
    const double s_lo = at(lo), s_hi = at(hi);
    if ((s_lo < 0.0) == (s_hi < 0.0))
        throw BracketError("critical_learning_rate: stability indicator has the same sign at both ends (" +
                           std::to_string(s_lo) + ", " + std::to_string(s_hi) + ")");
    const bool rising = s_lo < 0.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if ((at(mid) < 0.0) == rising)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<Plateau> detect_plateau(const Trajectory& traj, double window, double slope_tol) {
    std::vector<Plateau> out;
    const auto& s = traj.samples;
    if (s.size() < 2) return out;
    const double floor = s.back().eps_g + 10.0 * slope_tol * window;

    auto flat = [&](std::size_t k) {
        const double slope = (s[k + 1].eps_g - s[k].eps_g) / (s[k + 1].alpha - s[k].alpha);
        return std::fabs(slope) < slope_tol && s[k].eps_g > floor && s[k + 1].eps_g > floor;
    };
    auto emit = [&](std::size_t first, std::size_t last) {
        if (s[last].alpha - s[first].alpha < window) return;
        Plateau p{s[first].alpha, s[last].alpha, 0.0, 0.0};
        for (std::size_t k = first; k <= last; ++k) {
            p.eps_g += s[k].eps_g;
            p.mean_R += s[k].state.R.mean();
        }
        const double count = static_cast<double>(last - first + 1);
        p.eps_g /= count;
        p.mean_R /= count;
        out.push_back(p);
    };

    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        if (flat(k)) {
            if (!in_run) {
                run_start = k;
                in_run = true;
            }
        } else if (in_run) {
            emit(run_start, k);
            in_run = false;
        }
    }
    if (in_run) emit(run_start, s.size() - 1);
    return out;
}

double direction_angle_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double c = std::min(1.0, std::fabs(a.dot(b)) / (a.norm() * b.norm()));
    return std::acos(c) * 180.0 / M_PI;
}

}  // namespace scm::analysis
