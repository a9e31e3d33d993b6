#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "scmlab/config.hpp"
#include "scmlab/errors.hpp"
#include "scmlab/macro.hpp"
#include "scmlab/micro.hpp"
#include "scmlab/report.hpp"
#include "scmlab/svg_plot.hpp"
#include "scmlab/trajectory_csv.hpp"

using namespace scm;

namespace {

const char* kConfig = R"(# fig2 style
name = demo
mode = both
eta = 0.1
activation = relu
R_1_1 = 0.001
R_2_2 = 0.001
Q_1_1 = 0.2
Q_2_2 = 0.3
K = 2
M = 2
alpha_max = 20
stride = 50
n_dim = 500
)";

int parse_error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

Trajectory small_ode() {
    const ExperimentConfig c = parse_config(kConfig);
    return macro::integrate(c.initial, c.net, c.alpha_max, {c.step}, c.stride);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_config(kConfig);
    CHECK(c.name == "demo");
    CHECK(c.mode == RunMode::Both);
    CHECK(c.net.K == 2);
    CHECK(c.net.M == 2);
    CHECK(c.initial.R(1, 1) == 0.001);
    CHECK(c.initial.R(0, 1) == 0.0);
    CHECK(c.initial.Q(1, 1) == 0.3);
    CHECK(c.initial.T == Eigen::MatrixXd::Identity(2, 2));
    CHECK(c.alpha_max == 20);
    CHECK(c.stride == 50);
    CHECK(c.sim_config().steps == 20 * 500);
    CHECK(c.sim_config().measure_stride == 50);

    const ExperimentConfig back = parse_config(format_config(c));
    CHECK(format_config(back) == format_config(c));
}

TEST_CASE("config errors carry line numbers") {
    CHECK(parse_error_line("K = 1\nM = 1\nbogus = 3\n") == 3);
    CHECK(parse_error_line("K = 1\neta = 0.1\neta = 0.2\n") == 3);
    CHECK(parse_error_line("K = 1\n\neta = fast\n") == 3);
    CHECK(parse_error_line("K = 1\nM = 1\nR_2_1 = 0.5\n") == 3);
    CHECK(parse_error_line("K = 2\nM = 1\nQ_2_1 = 0.5\n") == 3);
    CHECK(parse_error_line("K = 1\nM = 1\njust words\n") == 3);
    CHECK(parse_error_line("K = 1\nM = 1\nactivation = tanh\n") == 3);
    CHECK(parse_error_line("K = 1\nM = 1\neta = -1\n") == 3);
    CHECK(parse_error_line("K = 1\nM = 1\nstep = 0\n") == 3);
    CHECK(parse_error_line("K = 1\nM = 1\nR_1_1 = 2\nQ_1_1 = 1\n") == 0);
    CHECK(parse_error_line("K = 2\nM = 2\neta2 = perceptron\n") == 0);
    // Simulation settings may still be overridden after parsing.
    CHECK_NOTHROW(parse_config("K = 1\nM = 1\nmode = sim\nn_dim = 50\n"));
}

TEST_CASE("csv round trip is byte-identical") {
    const Trajectory t = small_ode();
    const std::string text = format_csv(t);
    CHECK(format_csv(parse_csv(text)) == text);
    std::istringstream in(text);
    std::string header;
    std::getline(in, header);
    CHECK(header == "alpha,R_1_1,R_1_2,R_2_1,R_2_2,Q_1_1,Q_1_2,Q_2_2,eps_g,source");
    std::string row;
    std::getline(in, row);
    CHECK(std::count(row.begin(), row.end(), ',') == 9);
    CHECK(row.substr(row.size() - 4) == ",ode");

    micro::SimConfig sc;
    sc.N = 200;
    sc.steps = 400;
    sc.measure_stride = 100;
    OrderParameters one = OrderParameters::zeros(1, 1);
    one.Q(0, 0) = 0.25;
    const Trajectory s = micro::run(sc, one);
    const std::string st = format_csv(s);
    CHECK(format_csv(parse_csv(st)) == st);
    CHECK(parse_csv(st).source == TrajectorySource::Sim);

    const auto path = std::filesystem::temp_directory_path() / "scmlab_io_roundtrip.csv";
    write_csv(path, t);
    CHECK(format_csv(read_csv(path)) == text);
    std::filesystem::remove(path);
}

TEST_CASE("csv errors") {
    const std::string h = "alpha,R_1_1,Q_1_1,eps_g,source\n";
    CHECK_THROWS_AS(parse_csv(h + "0,0,0.25,0.1\n"), ParseError);
    CHECK_THROWS_AS(parse_csv(h + "1,0,0.25,0.1,ode\n0,0,0.25,0.1,ode\n"), ParseError);
    CHECK_THROWS_AS(parse_csv(h + "0,0,0.25,0.1,ode\n1,0,0.25,0.1,sim\n"), ParseError);
    CHECK_THROWS_AS(parse_csv(h + "0,x,0.25,0.1,ode\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("alpha,R_1_1,eps_g,source\n"), ParseError);
    try {
        parse_csv(h + "0,0,0.25,0.1,ode\n1,0,0.25,0.1,ode\n0.5,0,0.25,0.1,ode\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("svg output is deterministic and self-contained") {
    const Trajectory t = small_ode();
    Series e{"eps_g <ode>", {}, {}};
    for (const auto& s : t.samples) {
        e.x.push_back(s.alpha);
        e.y.push_back(s.eps_g);
    }
    e.x.push_back(21);
    e.y.push_back(0.0);  // dropped on a log axis
    const PlotOptions opt{"test & plot", "alpha", "eps_g", true};
    const std::string a = render_svg({e}, opt);
    CHECK(a == render_svg({e}, opt));
    CHECK(a.find("<svg") == 0);
    CHECK(a.find("href") == std::string::npos);
    CHECK(a.find("url(") == std::string::npos);
    CHECK(a.find("test &amp; plot") != std::string::npos);
    CHECK(a.find("&lt;ode&gt;") != std::string::npos);
    CHECK(a.find("nan") == std::string::npos);
    CHECK(a.find("inf") == std::string::npos);
    CHECK_NOTHROW(render_svg({}, {}));
}

TEST_CASE("report status follows every check") {
    Report r("demo");
    r.near("a", 1.0, 1.005, 0.01);
    r.at_most("b", 2.0, 1.0);
    r.at_least("c", 0.0, 0.0);
    r.above("d", 0.0, 1e-300);
    r.holds("e", true);
    CHECK(r.all_pass());
    CHECK(r.text().find("PASS: 5/5 checks passed") != std::string::npos);

    Report bad = r;
    bad.above("f", 0.0, 0.0);
    CHECK_FALSE(bad.all_pass());
    CHECK(bad.text().find("FAIL: 5/6 checks passed") != std::string::npos);

    std::istringstream lines(bad.jsonl());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* k : {"name", "expected", "got", "tolerance", "pass"}) CHECK(j.contains(k));
        ++n;
    }
    CHECK(n == 6);
    CHECK_FALSE(nlohmann::json::parse(bad.jsonl().substr(bad.jsonl().rfind('{')))["pass"].get<bool>());

    const auto dir = std::filesystem::temp_directory_path() / "scmlab_report_test";
    bad.write(dir);
    CHECK(std::filesystem::exists(dir / "report.txt"));
    CHECK(std::filesystem::exists(dir / "report.jsonl"));
    std::filesystem::remove_all(dir);
}

}
