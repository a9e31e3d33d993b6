#include <cmath>
#include <complex>

#include "doctest.h"
#include "scmlab/analysis.hpp"
#include "scmlab/errors.hpp"
#include "scmlab/experiments.hpp"
#include "scmlab/rng.hpp"

using namespace scm;

namespace {

OrderParameters perfect1() {
    return {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Identity(1, 1)};
}

NetConfig perceptron(double eta) { return {1, 1, eta, ActivationKind::ReLU, Eta2Mode::PerceptronExact}; }

Trajectory fig2_ode(double alpha_max) {
    OrderParameters s = OrderParameters::zeros(2, 2);
    s.R(0, 0) = s.R(1, 1) = 1e-3;
    s.Q(0, 0) = 0.2;
    s.Q(1, 1) = 0.3;
    return macro::integrate(s, {2, 2, 0.1, ActivationKind::ReLU, Eta2Mode::Off}, alpha_max, {0.01}, 10);
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("eigs on small matrices") {
    const auto id = analysis::eigs(Eigen::MatrixXd::Identity(3, 3));
    for (int k = 0; k < 3; ++k) CHECK(std::abs(id.values(k) - 1.0) < 1e-14);
    Eigen::MatrixXd rot(2, 2);
    rot << 0, 1, -1, 0;
    const auto r = analysis::eigs(rot);
    CHECK(std::abs(r.values(0) - std::complex<double>(0, 1)) < 1e-14);
    CHECK(std::abs(r.values(1) - std::complex<double>(0, -1)) < 1e-14);
    CHECK(r.max_residual < 1e-12);
    Eigen::MatrixXd a(3, 3);
    a << 2, 1, 0, 0, -3, 4, 0, 0, 5;
    const auto e = analysis::eigs(a);
    CHECK(e.values(0).real() == doctest::Approx(5));
    CHECK(e.values(2).real() == doctest::Approx(-3));
    for (int k = 0; k < 3; ++k) {
        CHECK(e.vectors.col(k).norm() == doctest::Approx(1));
        Eigen::Index big;
        e.vectors.col(k).cwiseAbs().maxCoeff(&big);
        CHECK(e.vectors(big, k).imag() == 0.0);
        CHECK(e.vectors(big, k).real() > 0);
    }
    CHECK_THROWS_AS(analysis::eigs(Eigen::MatrixXd::Zero(2, 3)), ConfigError);
}

TEST_CASE("perceptron linearization at the perfect student") {
    for (double eta : {0.1, 0.5, 1.0, 1.9}) {
        const auto rep = analysis::eigs(analysis::jacobian(perfect1(), perceptron(eta)));
        const double a = -eta / 2, b = eta * eta / 2 - eta;
        CHECK(std::fabs(rep.values(0).real() - std::max(a, b)) < 1e-6);
        CHECK(std::fabs(rep.values(1).real() - std::min(a, b)) < 1e-6);
        CHECK(rep.max_residual < 1e-8);
    }
    const auto rep = analysis::eigs(analysis::jacobian(perfect1(), perceptron(0.1)));
    // λ = −η/2 pairs with (1/2, 1), λ = η²/2 − η with (0, 1).
    CHECK(analysis::direction_angle_deg(rep.vectors.col(0).real(), Eigen::Vector2d(0.5, 1)) < 1e-3);
    CHECK(analysis::direction_angle_deg(rep.vectors.col(1).real(), Eigen::Vector2d(0, 1)) < 1e-3);
}

TEST_CASE("jacobian is linear in eta without the eta^2 term") {
    const OrderParameters s = experiments::random_state(2, 2, 3);
    const Eigen::MatrixXd a = analysis::jacobian(s, {2, 2, 0.1, ActivationKind::Erf, Eta2Mode::Off});
    const Eigen::MatrixXd b = analysis::jacobian(s, {2, 2, 0.2, ActivationKind::Erf, Eta2Mode::Off});
    CHECK((b - 2 * a).cwiseAbs().maxCoeff() <= 1e-9 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("jacobian agrees with directional secants") {
    GaussianStream g(11, 0);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const int k = 1 + static_cast<int>(s % 3), m = 1 + static_cast<int>((s / 3) % 3);
        const auto act = s % 2 ? ActivationKind::Erf : ActivationKind::ReLU;
        const NetConfig cfg{k, m, 0.1, act, Eta2Mode::Off};
        const OrderParameters st = experiments::random_state(k, m, 100 + s);
        const Eigen::VectorXd x = flatten(st);
        Eigen::VectorXd d(x.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = g.next();
        d.normalize();
        const Eigen::VectorXd jd = analysis::jacobian(st, cfg) * d;
        const Eigen::VectorXd f0 = analysis::flat_rhs(st, cfg);
        double err[2];
        int idx = 0;
        for (double eps : {1e-5, 1e-6}) {
            const Eigen::VectorXd f1 = analysis::flat_rhs(unflatten(x + eps * d, st), cfg);
            err[idx++] = ((f1 - f0) / eps - jd).norm();
        }
        INFO("state " << s << " errors " << err[0] << " " << err[1]);
        CHECK(err[1] < 1e-5 * jd.norm() + 1e-9);
        CHECK(err[0] / err[1] == doctest::Approx(10).epsilon(0.2));
    }
}

TEST_CASE("fixed points of the perceptron") {
    OrderParameters g = perfect1();
    g.R(0, 0) = g.Q(0, 0) = 0.9;
    const auto fp = analysis::find_fixed_point(perceptron(0.1), g);
    CHECK(std::fabs(fp.state.R(0, 0) - 1) < 1e-8);
    CHECK(std::fabs(fp.state.Q(0, 0) - 1) < 1e-8);
    CHECK(fp.residual <= 1e-12);
    CHECK(fp.state.invariant_violation() <= 1e-12);
    const auto same = analysis::find_fixed_point(perceptron(0.1), perfect1());
    CHECK(same.iterations <= 1);
    CHECK(same.state.R(0, 0) == 1.0);
}

TEST_CASE("symmetric plateau fixed point of K = M = 2") {
    const NetConfig cfg{2, 2, 0.1, ActivationKind::ReLU, Eta2Mode::Off};
    Eigen::MatrixXd q(2, 2);
    q << 0.7, 0.4, 0.4, 0.7;
    const OrderParameters guess(Eigen::MatrixXd::Constant(2, 2, 0.5), q, Eigen::MatrixXd::Identity(2, 2));
    const auto fp = analysis::find_fixed_point(cfg, guess);
    CHECK(fp.state.R(0, 0) == doctest::Approx(0.52).epsilon(0.02));
    CHECK((fp.state.R.array() - fp.state.R(0, 0)).abs().maxCoeff() < 1e-12);
    CHECK(fp.state.Q(0, 0) == fp.state.Q(1, 1));
    CHECK(fp.state.invariant_violation() <= 1e-10);
    const auto rep = analysis::eigs(analysis::jacobian(fp.state, cfg));
    CHECK(rep.values(0).real() > 0);
    CHECK(rep.values(1).real() < 0);
    Eigen::VectorXd u(7);
    u << 0.5, -0.5, -0.5, 0.5, 0, 0, 0;
    CHECK(analysis::direction_angle_deg(rep.vectors.col(0).real(), u) < 2);

    OrderParameters bad = guess;
    bad.Q << 0.5, 0.5, 0.5, 0.5;
    bad.R.setConstant(0.6);
    CHECK_THROWS_AS(analysis::find_fixed_point(cfg, bad), DomainError);
}

TEST_CASE("fixed point search gives up with the best iterate") {
    OrderParameters g = perfect1();
    g.R(0, 0) = 0.1;
    g.Q(0, 0) = 0.5;
    try {
        analysis::find_fixed_point(perceptron(0.1), g, 1e-12, 1);
        FAIL("expected FixedPointError");
    } catch (const analysis::FixedPointError& e) {
        CHECK(e.best().iterations == 1);
        CHECK(std::isfinite(e.best().residual));
    }
}

TEST_CASE("critical learning rate") {
    const double eta_c = analysis::critical_learning_rate(perceptron(1), perfect1(), {0.5, 4.0});
    CHECK(std::fabs(eta_c - 2) < 1e-3);
    for (double eta : {0.3, 1.0, 2.5})
        CHECK(analysis::stability_indicator(perfect1(), perceptron(eta)) ==
              doctest::Approx(std::max(-eta / 2, eta * eta / 2 - eta)).epsilon(1e-5));
    const NetConfig off{1, 1, 1, ActivationKind::ReLU, Eta2Mode::Off};
    CHECK_THROWS_AS(analysis::critical_learning_rate(off, perfect1(), {0.5, 4.0}), BracketError);
}

TEST_CASE("plateau detection") {
    const Trajectory t = fig2_ode(1000);
    const auto p = analysis::detect_plateau(t);
    REQUIRE(p.size() == 1);
    CHECK(std::fabs(p[0].mean_R - 0.52) <= 0.01);
    CHECK(p[0].alpha_end - p[0].alpha_start >= 50);
    CHECK(p[0].eps_g > t.back().eps_g);

    OrderParameters s = OrderParameters::zeros(1, 1);
    s.Q(0, 0) = 0.25;
    const Trajectory f1 = macro::integrate(s, perceptron(0.1), 300, {0.01}, 10);
    CHECK(analysis::detect_plateau(f1).empty());

    Trajectory flat;
    flat.config = perceptron(0.1);
    for (int i = 0; i <= 200; ++i) flat.samples.push_back({static_cast<double>(i), perfect1(), 0.0});
    CHECK(analysis::detect_plateau(flat).empty());
}

TEST_CASE("plateaus are sorted and disjoint") {
    Trajectory t;
    t.config = perceptron(0.1);
    // Two flat stretches at 0.3 and 0.2 joined by descents, ending at 0.
    for (int i = 0; i <= 400; ++i) {
        const double a = i;
        double e;
        if (a < 100) e = 0.3;
        else if (a < 150) e = 0.3 - 0.1 * (a - 100) / 50;
        else if (a < 250) e = 0.2;
        else if (a < 300) e = 0.2 - 0.2 * (a - 250) / 50;
        else e = 0.0;
        t.samples.push_back({a, perfect1(), e});
    }
    const auto p = analysis::detect_plateau(t);
    REQUIRE(p.size() == 2);
    CHECK(p[0].alpha_end <= p[1].alpha_start);
    CHECK(p[0].eps_g == doctest::Approx(0.3));
    CHECK(p[1].eps_g == doctest::Approx(0.2));
}

TEST_CASE("direction angle ignores sign") {
    CHECK(analysis::direction_angle_deg(Eigen::Vector2d(1, 0), Eigen::Vector2d(-2, 0)) == doctest::Approx(0));
    CHECK(analysis::direction_angle_deg(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == doctest::Approx(90));
    CHECK(analysis::direction_angle_deg(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 0)) == doctest::Approx(45));
}

}
