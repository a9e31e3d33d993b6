#include <cmath>
#include <numbers>

#include "doctest.h"
#include "scmlab/analysis.hpp"
#include "scmlab/errors.hpp"
#include "scmlab/macro.hpp"
#include "scmlab/micro.hpp"
#include "scmlab/rng.hpp"

using namespace scm;
using namespace scm::micro;

namespace {

OrderParameters fig1_initial() {
    OrderParameters s = OrderParameters::zeros(1, 1);
    s.Q(0, 0) = 0.25;
    return s;
}

OrderParameters fig2_initial() {
    OrderParameters s = OrderParameters::zeros(2, 2);
    s.R(0, 0) = s.R(1, 1) = 1e-3;
    s.Q(0, 0) = 0.2;
    s.Q(1, 1) = 0.3;
    return s;
}

double max_diff(const OrderParameters& a, const OrderParameters& b) {
    return std::max((a.R - b.R).cwiseAbs().maxCoeff(), (a.Q - b.Q).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_SUITE("micro") {

TEST_CASE("teacher rows are orthonormal") {
    const WeightMatrix b1 = init_teacher(1, 1000, 5);
    CHECK(b1.row(0).norm() == doctest::Approx(1).epsilon(1e-14));
    const WeightMatrix b2 = init_teacher(2, 10000, 5);
    CHECK(std::fabs(b2.row(0).dot(b2.row(1))) < 1e-10);
    CHECK((b2 * b2.transpose() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(init_teacher(3, 2, 5), ConfigError);
}

TEST_CASE("students realize their target overlaps") {
    const WeightMatrix b1 = init_teacher(1, 1000, 1);
    const WeightMatrix j1 = init_student(1, 1000, fig1_initial(), b1, 2);
    CHECK(j1.row(0).squaredNorm() == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(std::fabs(j1.row(0).dot(b1.row(0))) < 1e-8);

    const WeightMatrix b2 = init_teacher(2, 1000, 1);
    const OrderParameters match(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2),
                                Eigen::MatrixXd::Identity(2, 2));
    CHECK((init_student(2, 1000, match, b2, 3) - b2).cwiseAbs().maxCoeff() < 1e-8);

    SimConfig cfg;
    cfg.K = cfg.M = 2;
    const MicroSystem sys = make_system(cfg, fig2_initial());
    CHECK(max_diff(measure(sys), fig2_initial()) < 1e-8);

    OrderParameters bad = fig1_initial();
    bad.R(0, 0) = 0.6;
    CHECK_THROWS_AS(init_student(1, 1000, bad, b1, 2), ConfigError);
}

TEST_CASE("measured state of a fresh system") {
    SimConfig cfg;
    const MicroSystem sys = make_system(cfg, fig1_initial());
    const OrderParameters m = measure(sys);
    CHECK(max_diff(m, fig1_initial()) < 1e-8);
    CHECK(m.invariant_violation() <= 1e-15);
    const NetConfig net{1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::Off};
    CHECK(macro::gen_error(m, net) == doctest::Approx(macro::gen_error(fig1_initial(), net)).epsilon(1e-7));

    MicroSystem same = sys;
    same.J = same.B;
    const OrderParameters one = measure(same);
    CHECK(one.R(0, 0) == doctest::Approx(1).epsilon(1e-14));
    CHECK(one.Q(0, 0) == doctest::Approx(1).epsilon(1e-14));
    CHECK(one.T(0, 0) == doctest::Approx(1).epsilon(1e-14));
}

TEST_CASE("sgd steps that cannot move the student") {
    SimConfig cfg;
    cfg.K = cfg.M = 2;
    const OrderParameters match(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2),
                                Eigen::MatrixXd::Identity(2, 2));
    MicroSystem sys = make_system(cfg, match);
    sys.J = sys.B;
    GaussianStream g(3, 0);
    Eigen::VectorXd xi(cfg.N);
    for (int s = 0; s < 10; ++s) {
        g.fill({xi.data(), static_cast<std::size_t>(xi.size())});
        const WeightMatrix before = sys.J;
        sgd_step(sys, xi);
        CHECK(sys.J == before);
    }
    MicroSystem still = make_system(cfg, fig2_initial());
    still.eta = 0;
    const WeightMatrix before = still.J;
    sgd_step(still, xi);
    CHECK(still.J == before);
    CHECK_THROWS_AS(sgd_step(still, Eigen::VectorXd::Zero(10)), ConfigError);
}

TEST_CASE("runs are deterministic and leave the teacher untouched") {
    SimConfig cfg;
    cfg.N = 500;
    cfg.steps = 5000;
    cfg.measure_stride = 500;
    const Trajectory a = run(cfg, fig1_initial());
    const Trajectory b = run(cfg, fig1_initial());
    REQUIRE(a.samples.size() == 11);
    CHECK(a.source == TrajectorySource::Sim);
    CHECK(a.back().alpha == doctest::Approx(10));
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].alpha == b.samples[i].alpha);
        CHECK(a.samples[i].state.R == b.samples[i].state.R);
        CHECK(a.samples[i].state.Q == b.samples[i].state.Q);
        CHECK(a.samples[i].eps_g == b.samples[i].eps_g);
        CHECK(a.samples[i].state.invariant_violation() <= 1e-15);
    }
    cfg.seed = 2;
    CHECK(run(cfg, fig1_initial()).back().state.R(0, 0) != a.back().state.R(0, 0));

    MicroSystem sys = make_system(cfg, fig1_initial());
    const WeightMatrix teacher = sys.B;
    GaussianStream g(9, 0);
    Eigen::VectorXd xi(cfg.N);
    for (int s = 0; s < 100; ++s) {
        g.fill({xi.data(), static_cast<std::size_t>(xi.size())});
        sgd_step(sys, xi);
    }
    CHECK(sys.B == teacher);
    CHECK(sys.steps_done == 100);
}

TEST_CASE("small N needs an explicit override") {
    SimConfig cfg;
    cfg.N = 50;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.allow_small_n = true;
    CHECK_NOTHROW(cfg.validate());
    cfg.eta = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("uneven stride still records the last step") {
    SimConfig cfg;
    cfg.N = 200;
    cfg.steps = 1050;
    cfg.measure_stride = 500;
    const Trajectory t = run(cfg, fig1_initial());
    REQUIRE(t.samples.size() == 4);
    CHECK(t.back().alpha == doctest::Approx(1050.0 / 200));
}

}

TEST_SUITE("micro_slow") {

TEST_CASE("perceptron drift matches the flow at the fig1 initial state") {
    SimConfig cfg;
    cfg.N = 10000;
    cfg.eta = 0.1;
    const auto drift = empirical_drift(fig1_initial(), cfg, 100000);
    const Eigen::VectorXd rhs =
        analysis::flat_rhs(fig1_initial(), {1, 1, 0.1, ActivationKind::ReLU, Eta2Mode::PerceptronExact});
    for (Eigen::Index i = 0; i < rhs.size(); ++i) {
        INFO("component " << i << " drift " << drift.mean(i) << " +- " << drift.stderr_mean(i) << " rhs " << rhs(i));
        CHECK(std::fabs(drift.mean(i) - rhs(i)) <= 4 * drift.stderr_mean(i));
    }
}

TEST_CASE("test-set error matches the closed form") {
    OrderParameters s = OrderParameters::zeros(1, 1);
    s.Q(0, 0) = 1;
    SimConfig cfg;
    cfg.N = 10000;
    const MicroSystem sys = make_system(cfg, s);
    const auto e = test_set_error(sys, 100000, 1);
    INFO("mc " << e.mean << " +- " << e.stderr_mean);
    CHECK(std::fabs(e.mean - (0.5 - 1 / (2 * std::numbers::pi))) <= 4 * e.stderr_mean);
}

}
