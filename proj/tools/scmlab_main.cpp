#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "scmlab/analysis.hpp"
#include "scmlab/config.hpp"
#include "scmlab/experiments.hpp"
#include "scmlab/macro.hpp"
#include "scmlab/micro.hpp"
#include "scmlab/svg_plot.hpp"
#include "scmlab/trajectory_csv.hpp"

namespace {

using namespace scm;

std::string g17(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

struct Overrides {
    std::optional<double> alpha_max, step, eta;
    std::optional<long long> stride, steps, measure_stride;
    std::optional<std::string> activation, eta2;
    std::optional<int> n_dim;
    std::optional<std::uint64_t> seed;
    bool allow_small_n = false;
    std::string out, svg;

    void apply(ExperimentConfig& c) const {
        if (alpha_max) c.alpha_max = *alpha_max;
        if (step) c.step = *step;
        if (stride) c.stride = *stride;
        if (eta) c.net.eta = *eta;
        if (activation) c.net.activation = parse_activation(*activation);
        if (eta2) c.net.eta2_mode = parse_eta2_mode(*eta2);
        if (n_dim) c.n_dim = *n_dim;
        if (seed) c.seed = *seed;
        if (steps) c.steps = *steps;
        if (measure_stride) c.measure_stride = *measure_stride;
        if (allow_small_n) c.allow_small_n = true;
        c.validate();
    }
};

void add_ode_flags(CLI::App* app, Overrides& o) {
    app->add_option("--alpha-max", o.alpha_max, "Integrate up to this alpha")->check(CLI::PositiveNumber);
    app->add_option("--step", o.step, "RK4 step h")->check(CLI::PositiveNumber);
    app->add_option("--stride", o.stride, "Steps between recorded samples")->check(CLI::PositiveNumber);
    app->add_option("--eta", o.eta, "Learning rate")->check(CLI::PositiveNumber);
    app->add_option("--activation", o.activation, "relu or erf")->check(CLI::IsMember({"relu", "erf"}));
    app->add_option("--eta2", o.eta2, "off or perceptron")->check(CLI::IsMember({"off", "perceptron"}));
    app->add_option("--out", o.out, "Trajectory CSV path");
    app->add_option("--svg", o.svg, "Also plot the overlaps and eps_g to this SVG");
}

void print_sample(const TrajectorySample& s) {
    std::cout << "alpha=" << g17(s.alpha) << "\n";
    for (int i = 0; i < s.state.R.rows(); ++i)
        for (int n = 0; n < s.state.R.cols(); ++n)
            std::cout << "R_" << i + 1 << "_" << n + 1 << "=" << g17(s.state.R(i, n)) << "\n";
    for (int i = 0; i < s.state.Q.rows(); ++i)
        for (int k = i; k < s.state.Q.cols(); ++k)
            std::cout << "Q_" << i + 1 << "_" << k + 1 << "=" << g17(s.state.Q(i, k)) << "\n";
    std::cout << "eps_g=" << g17(s.eps_g) << "\n";
}

void write_outputs(const Trajectory& t, const std::string& csv, const std::string& svg) {
    write_csv(csv, t);
    std::cout << "csv=" << csv << "\n";
    if (svg.empty()) return;
    std::vector<Series> series;
    for (int i = 0; i < t.config.K; ++i)
        for (int n = 0; n < t.config.M; ++n) {
            Series s{"R" + std::to_string(i + 1) + std::to_string(n + 1), {}, {}};
            for (const auto& x : t.samples) {
                s.x.push_back(x.alpha);
                s.y.push_back(x.state.R(i, n));
            }
            series.push_back(std::move(s));
        }
    for (int i = 0; i < t.config.K; ++i)
        for (int k = i; k < t.config.K; ++k) {
            Series s{"Q" + std::to_string(i + 1) + std::to_string(k + 1), {}, {}};
            for (const auto& x : t.samples) {
                s.x.push_back(x.alpha);
                s.y.push_back(x.state.Q(i, k));
            }
            series.push_back(std::move(s));
        }
    Series e{"eps_g", {}, {}};
    for (const auto& x : t.samples) {
        e.x.push_back(x.alpha);
        e.y.push_back(x.eps_g);
    }
    series.push_back(std::move(e));
    write_svg(svg, series, {"Order parameters and generalization error", "alpha", ""});
    std::cout << "svg=" << svg << "\n";
}

// Analysis inputs: the config's network and initial state, or the last sample
// of a trajectory CSV when --state is given.
OrderParameters load_state(const ExperimentConfig& c, const std::string& state_csv) {
    if (state_csv.empty()) return c.initial;
    const Trajectory t = read_csv(state_csv);
    if (t.samples.empty()) throw ConfigError(state_csv + ": no samples");
    if (t.config.K != c.net.K || t.config.M != c.net.M)
        throw ConfigError(state_csv + ": K and M do not match the config");
    return t.back().state;
}

class JsonLines {
public:
    explicit JsonLines(const std::string& path) {
        if (path.empty()) return;
        f_.open(path, std::ios::binary);
        if (!f_) throw ConfigError("cannot write " + path);
    }
    void put(const nlohmann::ordered_json& j) {
        if (f_.is_open()) f_ << j.dump() << '\n';
    }

private:
    std::ofstream f_;
};

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void print_state_kv(const OrderParameters& s) {
    for (int i = 0; i < s.R.rows(); ++i)
        for (int n = 0; n < s.R.cols(); ++n) std::cout << "R_" << i + 1 << "_" << n + 1 << "=" << g17(s.R(i, n)) << "\n";
    for (int i = 0; i < s.Q.rows(); ++i)
        for (int k = i; k < s.Q.cols(); ++k) std::cout << "Q_" << i + 1 << "_" << k + 1 << "=" << g17(s.Q(i, k)) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online learning dynamics of soft committee machines"};
    app.require_subcommand(1);

    Overrides over;
    std::string config_path;

    auto* ode = app.add_subcommand("run-ode", "Integrate the order-parameter ODE for a config");
    ode->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    add_ode_flags(ode, over);

    auto* sim = app.add_subcommand("run-sim", "Run the N-dimensional SGD simulation for a config");
    sim->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    add_ode_flags(sim, over);
    sim->add_option("--n-dim", over.n_dim, "Input dimension N")->check(CLI::PositiveNumber);
    sim->add_option("--seed", over.seed, "RNG seed");
    sim->add_option("--steps", over.steps, "SGD steps (default alpha_max * N)")->check(CLI::PositiveNumber);
    sim->add_option("--measure-stride", over.measure_stride, "SGD steps between measurements")
        ->check(CLI::PositiveNumber);
    sim->add_flag("--allow-small-n", over.allow_small_n, "Permit N below 100");

    auto* analyze = app.add_subcommand("analyze", "Fixed points, spectra, critical rate and plateaus");
    analyze->require_subcommand(1);
    std::string state_csv, jsonl_path, traj_path;
    bool at_fixed_point = false;
    double tol = 1e-12, lo = 0.5, hi = 4.0, bisect_tol = 1e-4, window = 50.0, slope_tol = 1e-5;

    auto* eig = analyze->add_subcommand("eig", "Spectrum of the Jacobian at a state");
    eig->add_option("config", config_path, "Experiment config (network and state)")->required()->check(CLI::ExistingFile);
    eig->add_option("--state", state_csv, "Take the state from the last row of this trajectory CSV");
    eig->add_flag("--fixed-point", at_fixed_point, "Refine the state to a fixed point first");
    eig->add_option("--jsonl", jsonl_path, "Also write JSON-lines records here");

    auto* fixed = analyze->add_subcommand("fixed-point", "Newton search for a fixed point from a guess");
    fixed->add_option("config", config_path, "Experiment config (network and guess)")->required()->check(CLI::ExistingFile);
    fixed->add_option("--state", state_csv, "Take the guess from the last row of this trajectory CSV");
    fixed->add_option("--tol", tol, "Residual tolerance")->check(CLI::PositiveNumber);
    fixed->add_option("--jsonl", jsonl_path, "Also write JSON-lines records here");

    auto* etac = analyze->add_subcommand("eta-c", "Critical learning rate by bisection");
    etac->add_option("--config", config_path, "Config whose initial state is the fixed point (default: perceptron at R = Q = 1)")
        ->check(CLI::ExistingFile);
    etac->add_option("--lo", lo, "Lower end of the bracket")->check(CLI::PositiveNumber);
    etac->add_option("--hi", hi, "Upper end of the bracket")->check(CLI::PositiveNumber);
    etac->add_option("--tol", bisect_tol, "Bisection tolerance")->check(CLI::PositiveNumber);
    etac->add_option("--jsonl", jsonl_path, "Also write JSON-lines records here");

    auto* plateau = analyze->add_subcommand("plateau", "Detect plateaus in a trajectory CSV");
    plateau->add_option("trajectory", traj_path, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    plateau->add_option("--window", window, "Minimum plateau length in alpha")->check(CLI::PositiveNumber);
    plateau->add_option("--slope-tol", slope_tol, "Largest |d eps_g / d alpha| on a plateau")->check(CLI::PositiveNumber);
    plateau->add_option("--jsonl", jsonl_path, "Also write JSON-lines records here");

    auto* repro = app.add_subcommand("reproduce", "Reproduce a registered figure or table");
    std::string exp_name;
    experiments::ReproduceOptions ropt;
    std::string out_dir = "results";
    bool no_sim = false;
    std::vector<std::string> names;
    for (const auto& e : experiments::registry()) names.push_back(e.name);
    repro->add_option("name", exp_name, "fig1, fig2, fig3, table1 or fig4")->required()->check(CLI::IsMember(names));
    repro->add_option("--out", out_dir, "Output directory (files go to <out>/<name>)");
    repro->add_option("--sim-n", ropt.sim_n, "Override the simulation N")->check(CLI::PositiveNumber);
    repro->add_option("--sim-alpha-max", ropt.sim_alpha_max, "Override the simulation length")
        ->check(CLI::PositiveNumber);
    repro->add_option("--seed", ropt.seed, "Simulation seed");
    repro->add_flag("--no-sim", no_sim, "Skip the simulations");

    auto* list = app.add_subcommand("list", "List the registered experiments");

    auto* moments_cmd = app.add_subcommand("moments", "Moment kernel utilities");
    moments_cmd->group("");
    moments_cmd->require_subcommand(1);
    auto* check = moments_cmd->add_subcommand("check", "Closed-form kernels against the Monte-Carlo oracle");
    long long samples = 1000000;
    int cases = 1000;
    std::uint64_t seed = 1;
    check->add_option("--samples", samples, "Monte-Carlo draws per case (at least 10^6)")
        ->check(CLI::Range(1000000LL, 1000000000000LL));
    check->add_option("--cases", cases, "Random covariances per kernel")->check(CLI::PositiveNumber);
    check->add_option("--seed", seed, "RNG seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ode->parsed()) {
            ExperimentConfig c = load_config(config_path);
            over.apply(c);
            const Trajectory t = macro::integrate(c.initial, c.net, c.alpha_max, {c.step}, c.stride);
            print_sample(t.back());
            write_outputs(t, over.out.empty() ? c.name + "_ode.csv" : over.out, over.svg);
        } else if (sim->parsed()) {
            ExperimentConfig c = load_config(config_path);
            over.apply(c);
            const Trajectory t = micro::run(c.sim_config(), c.initial);
            print_sample(t.back());
            write_outputs(t, over.out.empty() ? c.name + "_sim.csv" : over.out, over.svg);
        } else if (eig->parsed()) {
            const ExperimentConfig c = load_config(config_path);
            OrderParameters s = load_state(c, state_csv);
            if (at_fixed_point) s = analysis::find_fixed_point(c.net, s).state;
            const auto rep = analysis::eigs(analysis::jacobian(s, c.net));
            JsonLines out(jsonl_path);
            print_state_kv(s);
            for (Eigen::Index k = 0; k < rep.values.size(); ++k) {
                std::cout << "lambda_" << k + 1 << "=" << g17(rep.values(k).real());
                if (rep.values(k).imag() != 0) std::cout << (rep.values(k).imag() > 0 ? "+" : "") << g17(rep.values(k).imag()) << "i";
                std::cout << "\n";
                nlohmann::ordered_json j;
                j["index"] = k + 1;
                j["re"] = rep.values(k).real();
                j["im"] = rep.values(k).imag();
                j["vector_re"] = to_vec(rep.vectors.col(k).real());
                j["vector_im"] = to_vec(rep.vectors.col(k).imag());
                out.put(j);
            }
            std::cout << "leading_vector=";
            for (Eigen::Index i = 0; i < rep.vectors.rows(); ++i)
                std::cout << (i ? "," : "") << g17(rep.vectors(i, 0).real());
            std::cout << "\nstable=" << (rep.leading_real() < 0 ? "true" : "false") << "\n";
            std::cout << "max_residual=" << g17(rep.max_residual) << "\n";
        } else if (fixed->parsed()) {
            const ExperimentConfig c = load_config(config_path);
            const auto fp = analysis::find_fixed_point(c.net, load_state(c, state_csv), tol);
            print_state_kv(fp.state);
            std::cout << "residual=" << g17(fp.residual) << "\niterations=" << fp.iterations
                      << "\npseudo_inverse=" << (fp.used_pseudo_inverse ? "true" : "false") << "\n";
            nlohmann::ordered_json j;
            j["state"] = to_vec(flatten(fp.state));
            j["residual"] = fp.residual;
            j["iterations"] = fp.iterations;
            j["pseudo_inverse"] = fp.used_pseudo_inverse;
            JsonLines(jsonl_path).put(j);
        } else if (etac->parsed()) {
            NetConfig net{1, 1, 1.0, ActivationKind::ReLU, Eta2Mode::PerceptronExact};
            OrderParameters fp(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Identity(1, 1));
            if (!config_path.empty()) {
                const ExperimentConfig c = load_config(config_path);
                net = c.net;
                fp = c.initial;
            }
            const double eta_c = analysis::critical_learning_rate(net, fp, {lo, hi}, bisect_tol);
            std::cout << "eta_c=" << g17(eta_c) << "\n";
            nlohmann::ordered_json j;
            j["eta_c"] = eta_c;
            j["lo"] = lo;
            j["hi"] = hi;
            j["tol"] = bisect_tol;
            JsonLines(jsonl_path).put(j);
        } else if (plateau->parsed()) {
            const auto found = analysis::detect_plateau(read_csv(traj_path), window, slope_tol);
            JsonLines out(jsonl_path);
            if (found.empty()) std::cout << "no plateau detected\n";
            std::cout << "plateaus=" << found.size() << "\n";
            for (std::size_t k = 0; k < found.size(); ++k) {
                const auto& p = found[k];
                std::cout << "plateau_" << k + 1 << "_alpha_start=" << g17(p.alpha_start) << "\n"
                          << "plateau_" << k + 1 << "_alpha_end=" << g17(p.alpha_end) << "\n"
                          << "plateau_" << k + 1 << "_eps_g=" << g17(p.eps_g) << "\n"
                          << "plateau_" << k + 1 << "_mean_R=" << g17(p.mean_R) << "\n";
                nlohmann::ordered_json j;
                j["alpha_start"] = p.alpha_start;
                j["alpha_end"] = p.alpha_end;
                j["eps_g"] = p.eps_g;
                j["mean_R"] = p.mean_R;
                out.put(j);
            }
        } else if (repro->parsed()) {
            ropt.out_dir = out_dir;
            ropt.run_sim = !no_sim;
            const Report r = experiments::reproduce(exp_name, ropt, &std::cerr);
            std::cout << r.text();
            return r.all_pass() ? 0 : 1;
        } else if (list->parsed()) {
            for (const auto& e : experiments::registry()) std::cout << e.name << "  " << e.description << "\n";
        } else if (check->parsed()) {
            const auto rows = experiments::kernel_gate(cases, samples, seed);
            bool ok = true;
            std::printf("%-18s %6s %8s %10s  %s\n", "kernel", "cases", "within", "max_z", "result");
            for (const auto& r : rows) {
                std::printf("%-18s %6d %8d %10.3f  %s\n", r.kernel.c_str(), r.cases, r.within, r.max_z,
                            r.pass ? "PASS" : "FAIL");
                ok = ok && r.pass;
            }
            std::printf("%s\n", ok ? "PASS" : "FAIL");
            return ok ? 0 : 1;
        }
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
