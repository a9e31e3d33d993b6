#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "scmlab/errors.hpp"
#include "scmlab/experiments.hpp"
#include "scmlab/trajectory_csv.hpp"

using namespace scm;

TEST_SUITE("experiments") {

TEST_CASE("registry") {
    std::vector<std::string> names;
    for (const auto& e : experiments::registry()) names.push_back(e.name);
    CHECK(names == std::vector<std::string>{"fig1", "fig2", "fig3", "table1", "fig4"});
    CHECK(experiments::configs("fig1").size() == 5);
    CHECK(experiments::configs("table1").size() == 2);
    for (const auto& e : names)
        for (const auto& c : experiments::configs(e)) CHECK_NOTHROW(c.validate());
    CHECK_THROWS_AS(experiments::configs("fig9"), ConfigError);
    CHECK_THROWS_AS(experiments::reproduce("fig9", {}), ConfigError);
}

TEST_CASE("random states are strictly realizable") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const OrderParameters st = experiments::random_state(3, 2, s);
        const Eigen::MatrixXd schur = st.Q - st.R * st.R.transpose();
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(schur).eigenvalues().minCoeff() > 0.04);
        CHECK(st.invariant_violation() == 0.0);
    }
}

TEST_CASE("max eps deviation interpolates the ODE") {
    Trajectory ode, sim;
    for (int i = 0; i <= 10; ++i) ode.samples.push_back({static_cast<double>(i), OrderParameters::zeros(1, 1), 1.0 - 0.1 * i});
    sim.samples.push_back({0.0, OrderParameters::zeros(1, 1), 1.0});
    sim.samples.push_back({2.5, OrderParameters::zeros(1, 1), 0.8});
    sim.samples.push_back({10.0, OrderParameters::zeros(1, 1), 0.01});
    CHECK(experiments::max_eps_deviation(sim, ode) == doctest::Approx(0.05));
    sim.samples.push_back({11.0, OrderParameters::zeros(1, 1), 0.0});
    CHECK_THROWS_AS(experiments::max_eps_deviation(sim, ode), ConfigError);
}

TEST_CASE("reproduce writes its artifacts") {
    const auto dir = std::filesystem::temp_directory_path() / "scmlab_reproduce_test";
    std::filesystem::remove_all(dir);
    experiments::ReproduceOptions opt;
    opt.out_dir = dir;
    const Report r = experiments::reproduce("fig4", opt);
    CHECK(r.all_pass());
    for (const char* f : {"fig4_ode.csv", "fig4_R.svg", "fig4_Q.svg", "report.txt", "report.jsonl"})
        CHECK(std::filesystem::exists(dir / "fig4" / f));
    std::ifstream j(dir / "fig4" / "report.jsonl");
    std::size_t lines = 0;
    for (std::string l; std::getline(j, l);) ++lines;
    CHECK(lines == r.checks().size());
    std::ifstream csv(dir / "fig4" / "fig4_ode.csv");
    std::stringstream text;
    text << csv.rdbuf();
    CHECK(format_csv(parse_csv(text.str())) == text.str());
    std::filesystem::remove_all(dir);
}

}
