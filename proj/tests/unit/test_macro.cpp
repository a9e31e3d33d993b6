#include <cmath>
#include <numbers>

#include "doctest.h"
#include "scmlab/errors.hpp"
#include "scmlab/experiments.hpp"
#include "scmlab/macro.hpp"

using namespace scm;

namespace {

OrderParameters perfect(int k) {
    return {Eigen::MatrixXd::Identity(k, k), Eigen::MatrixXd::Identity(k, k), Eigen::MatrixXd::Identity(k, k)};
}

OrderParameters fig1_initial() {
    OrderParameters s = OrderParameters::zeros(1, 1);
    s.Q(0, 0) = 0.25;
    return s;
}

}  // namespace

TEST_SUITE("macro") {

TEST_CASE("perceptron fixed point at R = Q = 1") {
    for (double eta : {0.1, 1.0, 1.9, 3.0}) {
        const auto d = macro::rhs(perfect(1), {1, 1, eta, ActivationKind::ReLU, Eta2Mode::PerceptronExact});
        CHECK(d.max_abs() < 1e-12);
    }
}

TEST_CASE("perfect students are fixed points") {
    for (int k : {1, 2, 3})
        for (auto act : {ActivationKind::ReLU, ActivationKind::Erf})
            for (double eta : {0.05, 0.5, 2.0}) {
                const NetConfig cfg{k, k, eta, act, Eta2Mode::Off};
                CHECK(macro::rhs(perfect(k), cfg).max_abs() < 1e-10);
                CHECK(macro::gen_error(perfect(k), cfg) == 0.0);
            }
}

TEST_CASE("generalization error values") {
    OrderParameters s = OrderParameters::zeros(1, 1);
    s.Q(0, 0) = 1;
    CHECK(macro::gen_error(s, {1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::Off}) ==
          doctest::Approx(0.5 - 1 / (2 * std::numbers::pi)));
    // erf: ε_g = 1/3 + 1/3 − 2·0 over 2 for orthogonal unit-norm student and teacher.
    CHECK(macro::gen_error(s, {1, 1, 0.1, ActivationKind::Erf, Eta2Mode::Off}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("dQ is symmetric and the flow is linear in eta without the eta^2 term") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const OrderParameters s = experiments::random_state(3, 2, seed);
        for (auto act : {ActivationKind::ReLU, ActivationKind::Erf}) {
            const auto a = macro::rhs(s, {3, 2, 0.1, act, Eta2Mode::Off});
            const auto b = macro::rhs(s, {3, 2, 0.2, act, Eta2Mode::Off});
            CHECK((a.dQ - a.dQ.transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK((b.dR - 2 * a.dR).cwiseAbs().maxCoeff() < 1e-15);
            CHECK((b.dQ - 2 * a.dQ).cwiseAbs().maxCoeff() < 1e-15);
        }
    }
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(macro::rhs(perfect(2), {2, 2, 0.1, ActivationKind::ReLU, Eta2Mode::PerceptronExact}), ConfigError);
    CHECK_THROWS_AS(macro::rhs(perfect(1), {1, 1, 0.1, ActivationKind::Erf, Eta2Mode::PerceptronExact}), ConfigError);
    CHECK_THROWS_AS(macro::rhs(perfect(1), {1, 1, 0.0, ActivationKind::ReLU, Eta2Mode::Off}), ConfigError);
    CHECK_THROWS_AS(macro::rhs(perfect(2), {1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::Off}), ConfigError);
    CHECK_THROWS_AS(macro::integrate(perfect(1), {1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::Off}, 1.0, {-0.01}),
                    ConfigError);
}

TEST_CASE("fig1 initial slope of Q") {
    // At R = 0 the student and teacher fields are independent, so
    // ⟨δx⟩ = √Q/(2π) − Q/2, ⟨δy⟩ = 1/4 and ⟨δ²⟩ = 1/4 − √Q/π + Q/2.
    const double eta = 0.1, q = 0.25, pi = std::numbers::pi;
    const auto d = macro::rhs(fig1_initial(), {1, 1, eta, ActivationKind::ReLU, Eta2Mode::PerceptronExact});
    const double dq = 2 * eta * (std::sqrt(q) / (2 * pi) - q / 2) + eta * eta * (0.25 - std::sqrt(q) / pi + q / 2);
    CHECK(d.dQ(0, 0) == doctest::Approx(dq).epsilon(1e-12));
    CHECK(d.dQ(0, 0) < 0);
    CHECK(d.dR(0, 0) == doctest::Approx(eta / 4).epsilon(1e-12));
}

TEST_CASE("fig1 trajectory rises to the perfect student") {
    const NetConfig cfg{1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::PerceptronExact};
    const Trajectory t = macro::integrate(fig1_initial(), cfg, 300, {0.01}, 100);
    REQUIRE(t.samples.size() == 301);
    CHECK(t.samples.front().alpha == 0.0);
    CHECK(t.back().alpha == 300.0);
    std::size_t q_min = 0;
    for (std::size_t i = 1; i < t.samples.size(); ++i)
        if (t.samples[i].state.Q(0, 0) < t.samples[q_min].state.Q(0, 0)) q_min = i;
    double r_drop = 0, q_drop_after_min = 0, eps_rise = 0, violation = 0;
    for (std::size_t i = 1; i < t.samples.size(); ++i) {
        const auto& a = t.samples[i - 1];
        const auto& b = t.samples[i];
        r_drop = std::max(r_drop, a.state.R(0, 0) - b.state.R(0, 0));
        if (i > q_min) q_drop_after_min = std::max(q_drop_after_min, a.state.Q(0, 0) - b.state.Q(0, 0));
        eps_rise = std::max(eps_rise, b.eps_g - a.eps_g);
        violation = std::max(violation, b.state.invariant_violation());
    }
    CHECK(r_drop <= 0);
    // Q first shrinks (negative initial slope above), then grows monotonically.
    CHECK(t.samples[q_min].alpha < 20);
    CHECK(q_drop_after_min <= 0);
    CHECK(t.back().state.Q(0, 0) > t.samples.front().state.Q(0, 0));
    CHECK(eps_rise <= 1e-9);
    CHECK(violation <= 1e-12);
    CHECK(t.back().state.R(0, 0) == doctest::Approx(1).epsilon(1e-5));
    CHECK(t.back().state.Q(0, 0) == doctest::Approx(1).epsilon(1e-5));
    CHECK(t.back().eps_g < 1e-6);
}

TEST_CASE("halving the step changes the fig1 run by less than 1e-6") {
    const NetConfig cfg{1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::PerceptronExact};
    const Trajectory a = macro::integrate(fig1_initial(), cfg, 300, {0.01}, 100);
    const Trajectory b = macro::integrate(fig1_initial(), cfg, 300, {0.005}, 200);
    REQUIRE(a.samples.size() == b.samples.size());
    double worst = 0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        REQUIRE(a.samples[i].alpha == doctest::Approx(b.samples[i].alpha));
        worst = std::max({worst, std::fabs(a.samples[i].state.R(0, 0) - b.samples[i].state.R(0, 0)),
                          std::fabs(a.samples[i].state.Q(0, 0) - b.samples[i].state.Q(0, 0))});
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("the last step is shortened to land on alpha_max") {
    const NetConfig cfg{1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::PerceptronExact};
    const Trajectory t = macro::integrate(fig1_initial(), cfg, 1.005, {0.01}, 50);
    CHECK(t.back().alpha == doctest::Approx(1.005));
    CHECK(t.samples.size() == 4);
}

TEST_CASE("student-permutation symmetry is preserved") {
    OrderParameters s = OrderParameters::zeros(2, 2);
    s.R.setConstant(1e-3);
    s.Q << 0.2, 0.05, 0.05, 0.2;
    const Trajectory t = macro::integrate(s, {2, 2, 0.1, ActivationKind::ReLU, Eta2Mode::Off}, 200, {0.01}, 1000);
    for (const auto& x : t.samples) {
        CHECK((x.state.R.row(0) - x.state.R.row(1)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(std::fabs(x.state.Q(0, 0) - x.state.Q(1, 1)) < 1e-14);
    }
    // Without the asymmetry the students never specialize.
    CHECK(std::fabs(t.back().state.R(0, 0) - t.back().state.R(0, 1)) < 1e-12);
}

TEST_CASE("fig2 run shows the plateau then specializes") {
    OrderParameters s = OrderParameters::zeros(2, 2);
    s.R(0, 0) = s.R(1, 1) = 1e-3;
    s.Q(0, 0) = 0.2;
    s.Q(1, 1) = 0.3;
    const Trajectory t = macro::integrate(s, {2, 2, 0.1, ActivationKind::ReLU, Eta2Mode::Off}, 1000, {0.01}, 1000);
    const auto& mid = t.samples[10].state;  // alpha = 100
    for (int i = 0; i < 2; ++i)
        for (int n = 0; n < 2; ++n) CHECK(mid.R(i, n) == doctest::Approx(0.52).epsilon(0.02));
    CHECK(t.back().eps_g < 1e-6);
    CHECK(std::max(t.back().state.R(0, 0), t.back().state.R(0, 1)) > 0.999);
}

TEST_CASE("divergence reports the last finite sample") {
    const NetConfig cfg{1, 1, 10.0, ActivationKind::ReLU, Eta2Mode::PerceptronExact};
    OrderParameters s = fig1_initial();
    s.R(0, 0) = 0.4;
    try {
        macro::integrate(s, cfg, 1000, {0.01}, 10);
        FAIL("expected an error");
    } catch (const DivergenceError& e) {
        CHECK(std::isfinite(e.last().eps_g));
        CHECK(e.last().alpha > 0);
    } catch (const IntegrationError& e) {
        CHECK(e.alpha() > 0);
    }
}

}
