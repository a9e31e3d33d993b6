#include "scmlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "scmlab/analysis.hpp"
#include "scmlab/micro.hpp"
#include "scmlab/moments.hpp"
#include "scmlab/rng.hpp"
#include "scmlab/svg_plot.hpp"
#include "scmlab/trajectory_csv.hpp"

namespace scm::experiments {

namespace {

constexpr double kFig1Etas[] = {0.05, 0.1, 0.5, 1.0, 1.9};

std::string fmt(const char* f, double v) {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

ExperimentConfig base(const std::string& name, int k, int m, double eta, ActivationKind act, Eta2Mode e2) {
    ExperimentConfig c;
    c.name = name;
    c.net = NetConfig{k, m, eta, act, e2};
    c.initial = OrderParameters::zeros(k, m);
    return c;
}

ExperimentConfig fig1_config(double eta) {
    ExperimentConfig c = base("fig1_eta" + fmt("%g", eta), 1, 1, eta, ActivationKind::ReLU, Eta2Mode::PerceptronExact);
    c.initial.Q(0, 0) = 0.25;
    c.alpha_max = 300;
    c.stride = 10;
    c.n_dim = 1000;
    c.mode = eta == 0.1 ? RunMode::Both : RunMode::Ode;
    return c;
}

ExperimentConfig fig2_config() {
    ExperimentConfig c = base("fig2", 2, 2, 0.1, ActivationKind::ReLU, Eta2Mode::Off);
    c.initial.R(0, 0) = c.initial.R(1, 1) = 1e-3;
    c.initial.Q(0, 0) = 0.2;
    c.initial.Q(1, 1) = 0.3;
    c.alpha_max = 1500;
    c.stride = 10;
    c.mode = RunMode::Both;
    c.n_dim = 10000;
    c.steps = 500LL * 10000;
    return c;
}

ExperimentConfig fig3_config(ActivationKind act) {
    ExperimentConfig c = base(std::string("fig3_") + std::string(to_string(act)), 3, 2, 0.1, act, Eta2Mode::Off);
    c.initial.R(0, 0) = 1e-3;
    c.initial.Q(0, 0) = 0.2;
    c.initial.Q(1, 1) = 0.3;
    c.initial.Q(2, 2) = 0.25;
    // The erf run settles faster but needs longer to switch unit 2 off fully.
    c.alpha_max = act == ActivationKind::ReLU ? 5000 : 8000;
    c.stride = 100;
    return c;
}

ExperimentConfig fig4_config() {
    ExperimentConfig c = base("fig4", 2, 3, 0.1, ActivationKind::ReLU, Eta2Mode::Off);
    c.initial.R(0, 0) = 1e-3;
    c.initial.Q(0, 0) = c.initial.Q(1, 1) = 0.2;
    c.alpha_max = 3000;
    c.stride = 100;
    return c;
}

Trajectory run_ode(const ExperimentConfig& c) {
    return macro::integrate(c.initial, c.net, c.alpha_max, {c.step}, c.stride);
}

double max_eps_increase(const Trajectory& t) {
    double worst = 0.0;
    for (std::size_t i = 1; i < t.samples.size(); ++i)
        worst = std::max(worst, t.samples[i].eps_g - t.samples[i - 1].eps_g);
    return worst;
}

double max_violation(const Trajectory& t) {
    double worst = 0.0;
    for (const auto& s : t.samples) worst = std::max(worst, s.state.invariant_violation());
    return worst;
}

double overlap(const TrajectorySample& s, bool use_q) { return use_q ? s.state.Q(0, 0) : s.state.R(0, 0); }

// Largest drop between successive samples from index `from` on.
double max_drop(const Trajectory& t, bool use_q, std::size_t from = 0) {
    double worst = 0.0;
    for (std::size_t i = std::max<std::size_t>(from, 1); i < t.samples.size(); ++i)
        worst = std::max(worst, overlap(t.samples[i - 1], use_q) - overlap(t.samples[i], use_q));
    return worst;
}

void common_checks(Report& r, const std::string& label, const Trajectory& t) {
    r.at_most(label + " eps_g max increase per sample", 1e-9, max_eps_increase(t));
    r.at_most(label + " invariant violation", 1e-8, max_violation(t));
}

Series component(const Trajectory& t, const std::string& label, char which, int a, int b) {
    Series s{label, {}, {}};
    for (const auto& x : t.samples) {
        s.x.push_back(x.alpha);
        if (which == 'R')
            s.y.push_back(x.state.R(a, b));
        else if (which == 'Q')
            s.y.push_back(x.state.Q(a, b));
        else
            s.y.push_back(x.eps_g);
    }
    return s;
}

std::vector<Series> overlap_series(const Trajectory& t, char which, const std::string& suffix) {
    std::vector<Series> out;
    const int k = t.config.K, m = t.config.M;
    if (which == 'R') {
        for (int i = 0; i < k; ++i)
            for (int n = 0; n < m; ++n)
                out.push_back(component(t, "R" + std::to_string(i + 1) + std::to_string(n + 1) + suffix, 'R', i, n));
    } else {
        for (int i = 0; i < k; ++i)
            for (int j = i; j < k; ++j)
                out.push_back(component(t, "Q" + std::to_string(i + 1) + std::to_string(j + 1) + suffix, 'Q', i, j));
    }
    return out;
}

struct Output {
    const ReproduceOptions& opt;
    std::filesystem::path dir;
    std::ostream* log;

    void csv(const std::string& file, const Trajectory& t) const {
        if (!opt.write_files) return;
        write_csv(dir / file, t);
        if (log) *log << "wrote " << (dir / file).string() << "\n";
    }
    void svg(const std::string& file, const std::vector<Series>& s, const PlotOptions& p) const {
        if (!opt.write_files) return;
        write_svg(dir / file, s, p);
        if (log) *log << "wrote " << (dir / file).string() << "\n";
    }
    void say(const std::string& line) const {
        if (log) *log << line << std::endl;
    }
};

Trajectory run_sim(const ExperimentConfig& c, int n, double alpha_max, std::uint64_t seed) {
    ExperimentConfig s = c;
    s.n_dim = n;
    s.seed = seed;
    s.steps = static_cast<long long>(std::llround(alpha_max * n));
    s.measure_stride = 0;
    return micro::run(s.sim_config(), s.initial);
}

double sim_alpha(const ExperimentConfig& c, const ReproduceOptions& opt) {
    if (opt.sim_alpha_max > 0) return opt.sim_alpha_max;
    return c.steps > 0 ? static_cast<double>(c.steps) / c.n_dim : c.alpha_max;
}

void plateau_checks(Report& r, const Trajectory& ode) {
    const auto plateaus = analysis::detect_plateau(ode);
    r.near("plateau count", 1, static_cast<double>(plateaus.size()), 0);
    if (!plateaus.empty()) {
        r.near("plateau mean R", 0.52, plateaus.front().mean_R, 0.01);
        r.note("plateau alpha range [" + fmt("%g", plateaus.front().alpha_start) + ", " +
               fmt("%g", plateaus.front().alpha_end) + "], eps_g " + fmt("%.6g", plateaus.front().eps_g));
    }

    const NetConfig cfg = ode.config;
    Eigen::MatrixXd q(2, 2);
    q << 0.7, 0.4, 0.4, 0.7;
    const OrderParameters guess(Eigen::MatrixXd::Constant(2, 2, 0.5), q, Eigen::MatrixXd::Identity(2, 2));
    const auto fp = analysis::find_fixed_point(cfg, guess);
    r.near("symmetric fixed point R", 0.52, fp.state.R(0, 0), 0.01);
    const auto rep = analysis::eigs(analysis::jacobian(fp.state, cfg));
    const double lam = rep.leading_real();
    r.near("leading eigenvalue / eta", 0.24, lam / cfg.eta, 0.01);
    Eigen::VectorXd u5(7);
    u5 << 0.5, -0.5, -0.5, 0.5, 0, 0, 0;
    r.at_most("escape eigenvector angle (deg)", 2.0, analysis::direction_angle_deg(rep.vectors.col(0).real(), u5));
    r.above("leading eigenvalue positive", 0.0, lam);
    r.note("fixed point R=" + fmt("%.6f", fp.state.R(0, 0)) + " Q11=" + fmt("%.6f", fp.state.Q(0, 0)) +
           " Q12=" + fmt("%.6f", fp.state.Q(0, 1)) + "; leading eigenvalue " + fmt("%.6f", lam) + " at eta=" +
           fmt("%g", cfg.eta) + " (eigenvalues scale with eta when the eta^2 term is off)");
}

Report fig1(const ReproduceOptions& opt, const Output& out) {
    Report r("fig1: perceptron learning");
    std::vector<Series> eps;
    Trajectory ref;
    for (double eta : kFig1Etas) {
        const ExperimentConfig c = fig1_config(eta);
        out.say("ode " + c.name);
        Trajectory t = run_ode(c);
        out.csv(c.name + "_ode.csv", t);
        const std::string label = "eta=" + fmt("%g", eta);
        common_checks(r, label, t);
        eps.push_back(component(t, label, 'e', 0, 0));
        if (eta == 0.1) ref = t;
    }
    r.at_most("eta=0.1 largest drop of R", 0.0, max_drop(ref, false));
    // Q first shrinks: at R = 0 the decay term of dQ/dalpha outweighs the
    // gain, so the rise is monotone only from the minimum of Q on.
    std::size_t q_min = 0;
    for (std::size_t i = 1; i < ref.samples.size(); ++i)
        if (overlap(ref.samples[i], true) < overlap(ref.samples[q_min], true)) q_min = i;
    r.at_most("eta=0.1 largest drop of Q after its minimum", 0.0, max_drop(ref, true, q_min + 1));
    r.above("eta=0.1 net rise of Q", 0.0, ref.back().state.Q(0, 0) - ref.samples.front().state.Q(0, 0));
    r.note("eta=0.1: Q falls from " + fmt("%.4f", ref.samples.front().state.Q(0, 0)) + " to " +
           fmt("%.4f", ref.samples[q_min].state.Q(0, 0)) + " at alpha=" + fmt("%g", ref.samples[q_min].alpha) +
           " before rising to 1; R rises monotonically");
    r.near("eta=0.1 final R", 1.0, ref.back().state.R(0, 0), 1e-3);
    r.near("eta=0.1 final Q", 1.0, ref.back().state.Q(0, 0), 1e-3);
    r.at_most("eta=0.1 final eps_g", 1e-6, ref.back().eps_g);
    r.near("eta=0.1 plateau count", 0, static_cast<double>(analysis::detect_plateau(ref).size()), 0);

    std::vector<Series> ov{component(ref, "R ode", 'R', 0, 0), component(ref, "Q ode", 'Q', 0, 0)};
    if (opt.run_sim) {
        const ExperimentConfig c = fig1_config(0.1);
        const int n = opt.sim_n > 0 ? opt.sim_n : c.n_dim;
        out.say("sim fig1 N=" + std::to_string(n));
        Trajectory s = run_sim(c, n, sim_alpha(c, opt), opt.seed);
        out.csv("fig1_sim.csv", s);
        r.at_most("sim N=" + std::to_string(n) + " max |eps_g sim - ode|", 5.0 / std::sqrt(n),
                  max_eps_deviation(s, ref));
        ov.push_back(component(s, "R sim", 'R', 0, 0));
        ov.push_back(component(s, "Q sim", 'Q', 0, 0));
        eps.push_back(component(s, "eta=0.1 sim", 'e', 0, 0));
    }
    out.svg("fig1_overlaps.svg", ov, {"Perceptron overlaps, eta=0.1", "alpha", "R, Q"});
    out.svg("fig1_eps.svg", eps, {"Generalization error", "alpha", "eps_g", true});

    r.merge(perceptron_spectrum({0.1, 0.5, 1.0, 1.9}));
    r.merge(critical_rate());
    return r;
}

Report fig2(const ReproduceOptions& opt, const Output& out) {
    Report r("fig2: K=M=2 plateau and specialization");
    const ExperimentConfig c = fig2_config();
    out.say("ode fig2");
    const Trajectory t = run_ode(c);
    out.csv("fig2_ode.csv", t);
    common_checks(r, "ode", t);
    r.at_most("ode final eps_g", 1e-6, t.back().eps_g);
    plateau_checks(r, t);

    std::vector<Series> rs = overlap_series(t, 'R', " ode");
    std::vector<Series> qs = overlap_series(t, 'Q', " ode");
    std::vector<Series> eps{component(t, "ode", 'e', 0, 0)};
    if (opt.run_sim) {
        const int n = opt.sim_n > 0 ? opt.sim_n : c.n_dim;
        const double a = sim_alpha(c, opt);
        out.say("sim fig2 N=" + std::to_string(n) + " alpha_max=" + fmt("%g", a));
        Trajectory s = run_sim(c, n, a, opt.seed);
        out.csv("fig2_sim.csv", s);
        r.at_most("sim N=" + std::to_string(n) + " max |eps_g sim - ode|", 5.0 / std::sqrt(n),
                  max_eps_deviation(s, t));
        for (auto& x : overlap_series(s, 'R', " sim")) rs.push_back(std::move(x));
        for (auto& x : overlap_series(s, 'Q', " sim")) qs.push_back(std::move(x));
        eps.push_back(component(s, "sim N=" + std::to_string(n), 'e', 0, 0));
    }
    out.svg("fig2_R.svg", rs, {"Student-teacher overlaps", "alpha", "R_in"});
    out.svg("fig2_Q.svg", qs, {"Student-student overlaps", "alpha", "Q_ik"});
    out.svg("fig2_eps.svg", eps, {"Generalization error", "alpha", "eps_g", true});
    return r;
}

struct Fig3Runs {
    Trajectory relu, erf;
};

Fig3Runs fig3_runs(const Output& out) {
    Fig3Runs f;
    for (auto act : {ActivationKind::ReLU, ActivationKind::Erf}) {
        const ExperimentConfig c = fig3_config(act);
        out.say("ode " + c.name);
        Trajectory t = run_ode(c);
        out.csv(c.name + "_ode.csv", t);
        out.svg(c.name + "_R.svg", overlap_series(t, 'R', ""),
                {"Student-teacher overlaps, " + std::string(to_string(act)), "alpha", "R_in"});
        out.svg(c.name + "_Q.svg", overlap_series(t, 'Q', ""),
                {"Student-student overlaps, " + std::string(to_string(act)), "alpha", "Q_ik"});
        (act == ActivationKind::ReLU ? f.relu : f.erf) = std::move(t);
    }
    return f;
}

void table_checks(Report& r, const Fig3Runs& f) {
    const double relu_row[6] = {1.00, 0.00, 0.00, 0.24, 0.25, 0.27};
    const double erf_row[6] = {1, 0, 0, 0, 0, 1};
    const char* names[6] = {"Q11", "Q12", "Q13", "Q22", "Q23", "Q33"};
    const int idx[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    for (int e = 0; e < 6; ++e)
        r.near(std::string("relu ") + names[e], relu_row[e], f.relu.back().state.Q(idx[e][0], idx[e][1]), 0.02);
    for (int e = 0; e < 6; ++e)
        r.near(std::string("erf ") + names[e], erf_row[e], f.erf.back().state.Q(idx[e][0], idx[e][1]), 0.02);
    const auto& q = f.relu.back().state.Q;
    const auto& rr = f.relu.back().state.R;
    r.near("relu Q22 + 2 Q23 + Q33", 1.0, q(1, 1) + 2 * q(1, 2) + q(2, 2), 0.03);
    r.near("relu R22 + R32", 1.0, rr(1, 1) + rr(2, 1), 0.03);
}

Report fig3(const Output& out) {
    Report r("fig3: overrealizable K=3, M=2");
    const Fig3Runs f = fig3_runs(out);
    for (const auto* t : {&f.relu, &f.erf}) {
        const std::string a(to_string(t->config.activation));
        common_checks(r, a, *t);
        r.at_most(a + " final eps_g", 1e-6, t->back().eps_g);
        r.near(a + " final R11", 1.0, t->back().state.R(0, 0), 0.01);
    }
    return r;
}

Report fig4(const Output& out) {
    Report r("fig4: unrealizable K=2, M=3");
    const ExperimentConfig c = fig4_config();
    out.say("ode fig4");
    const Trajectory t = run_ode(c);
    out.csv("fig4_ode.csv", t);
    out.svg("fig4_R.svg", overlap_series(t, 'R', ""), {"Student-teacher overlaps", "alpha", "R_in"});
    out.svg("fig4_Q.svg", overlap_series(t, 'Q', ""), {"Student-student overlaps", "alpha", "Q_ik"});
    common_checks(r, "ode", t);
    r.near("final R22", 0.94, t.back().state.R(1, 1), 0.01);
    r.near("final R23", 0.94, t.back().state.R(1, 2), 0.01);
    r.above("final eps_g", 0.0, t.back().eps_g);
    return r;
}

}  // namespace

const std::vector<ExperimentInfo>& registry() {
    static const std::vector<ExperimentInfo> r{
        {"fig1", "perceptron: R, Q rise to (1, 1); eps_g for eta in {0.05, 0.1, 0.5, 1.0, 1.9}; sim N=1000"},
        {"fig2", "K=M=2 ReLU: symmetric plateau at R ~ 0.52, escape eigenvector; sim N=10^4"},
        {"fig3", "K=3, M=2 overrealizable, ReLU and erf"},
        {"table1", "asymptotic student-student overlaps of the fig3 runs"},
        {"fig4", "K=2, M=3 unrealizable ReLU"},
    };
    return r;
}

std::vector<ExperimentConfig> configs(const std::string& name) {
    if (name == "fig1") {
        std::vector<ExperimentConfig> v;
        for (double eta : kFig1Etas) v.push_back(fig1_config(eta));
        return v;
    }
    if (name == "fig2") return {fig2_config()};
    if (name == "fig3" || name == "table1") return {fig3_config(ActivationKind::ReLU), fig3_config(ActivationKind::Erf)};
    if (name == "fig4") return {fig4_config()};
    throw ConfigError("unknown experiment '" + name + "' (expected fig1, fig2, fig3, table1 or fig4)");
}

Report reproduce(const std::string& name, const ReproduceOptions& opt, std::ostream* log) {
    configs(name);
    const Output out{opt, opt.out_dir / name, log};
    if (opt.write_files) std::filesystem::create_directories(out.dir);
    Report r;
    if (name == "fig1")
        r = fig1(opt, out);
    else if (name == "fig2")
        r = fig2(opt, out);
    else if (name == "fig3")
        r = fig3(out);
    else if (name == "table1") {
        r = Report("table1: asymptotic overlaps, K=3, M=2");
        table_checks(r, fig3_runs(out));
    } else
        r = fig4(out);
    if (opt.write_files) {
        r.write(out.dir);
        if (log) *log << "wrote " << (out.dir / "report.txt").string() << "\n";
    }
    return r;
}

Report perceptron_spectrum(const std::vector<double>& etas, double tol) {
    Report r("perceptron linearization at (R, Q) = (1, 1)");
    const OrderParameters fp(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Identity(1, 1));
    for (double eta : etas) {
        const NetConfig cfg{1, 1, eta, ActivationKind::ReLU, Eta2Mode::PerceptronExact};
        const auto rep = analysis::eigs(analysis::jacobian(fp, cfg));
        // Sorted by descending real part, like the report.
        double want[2] = {-eta / 2, eta * eta / 2 - eta};
        Eigen::VectorXd u[2] = {Eigen::Vector2d(0.5, 1.0), Eigen::Vector2d(0.0, 1.0)};
        if (want[1] > want[0]) {
            std::swap(want[0], want[1]);
            std::swap(u[0], u[1]);
        }
        const std::string e = "eta=" + fmt("%g", eta);
        for (int k = 0; k < 2; ++k) {
            r.near(e + " lambda" + std::to_string(k + 1), want[k], rep.values(k).real(), tol);
            r.near(e + " lambda" + std::to_string(k + 1) + " imag", 0.0, rep.values(k).imag(), tol);
            if (std::fabs(want[0] - want[1]) > 1e-3)
                r.at_most(e + " eigenvector" + std::to_string(k + 1) + " angle (deg)", 0.01,
                          analysis::direction_angle_deg(rep.vectors.col(k).real(), u[k]));
        }
    }
    return r;
}

Report critical_rate(double tol) {
    Report r("critical learning rate of the perceptron");
    const OrderParameters fp(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Identity(1, 1));
    const NetConfig cfg{1, 1, 1.0, ActivationKind::ReLU, Eta2Mode::PerceptronExact};
    r.near("eta_c", 2.0, analysis::critical_learning_rate(cfg, fp, {0.5, 4.0}, 1e-4), tol);
    return r;
}

Report plateau_analysis() {
    Report r("K=M=2 plateau");
    plateau_checks(r, run_ode(fig2_config()));
    return r;
}

Report macro_micro(const std::string& name, int n, double sim_alpha_max, std::uint64_t seed) {
    ExperimentConfig c;
    if (name == "fig1")
        c = fig1_config(0.1);
    else if (name == "fig2")
        c = fig2_config();
    else if (name == "fig3_relu")
        c = fig3_config(ActivationKind::ReLU);
    else if (name == "fig3_erf")
        c = fig3_config(ActivationKind::Erf);
    else if (name == "fig4")
        c = fig4_config();
    else
        throw ConfigError("macro_micro: unknown run '" + name + "' (expected fig1, fig2, fig3_relu, fig3_erf or fig4)");
    Report r(name + ": simulation against ODE");
    ExperimentConfig ode = c;
    ode.alpha_max = sim_alpha_max;
    const Trajectory t = run_ode(ode);
    const Trajectory s = run_sim(c, n, sim_alpha_max, seed);
    r.at_most(name + " sim N=" + std::to_string(n) + " max |eps_g sim - ode|", 5.0 / std::sqrt(n),
              max_eps_deviation(s, t));
    return r;
}

Report table_asymptotics() {
    Report r("asymptotic overlaps, K=3, M=2");
    const ReproduceOptions opt{.write_files = false};
    table_checks(r, fig3_runs(Output{opt, {}, nullptr}));
    return r;
}

Report unrealizable() {
    const ReproduceOptions opt{.write_files = false};
    return fig4(Output{opt, {}, nullptr});
}

double max_eps_deviation(const Trajectory& sim, const Trajectory& ode) {
    const auto& o = ode.samples;
    if (o.empty()) throw ConfigError("max_eps_deviation: empty ODE trajectory");
    double worst = 0.0;
    for (const auto& s : sim.samples) {
        if (s.alpha < o.front().alpha - 1e-9 || s.alpha > o.back().alpha + 1e-9)
            throw ConfigError("max_eps_deviation: simulation alpha " + fmt("%g", s.alpha) +
                              " is outside the ODE range");
        auto it = std::lower_bound(o.begin(), o.end(), s.alpha,
                                   [](const TrajectorySample& a, double v) { return a.alpha < v; });
        double e;
        if (it == o.end())
            e = o.back().eps_g;
        else if (it == o.begin() || it->alpha == s.alpha)
            e = it->eps_g;
        else {
            const auto& lo = *(it - 1);
            const double w = (s.alpha - lo.alpha) / (it->alpha - lo.alpha);
            e = (1 - w) * lo.eps_g + w * it->eps_g;
        }
        worst = std::max(worst, std::fabs(s.eps_g - e));
    }
    return worst;
}

std::vector<KernelGateRow> kernel_gate(int cases, long long samples, std::uint64_t seed) {
    using moments::MomentForm;
    if (cases < 1) throw ConfigError("kernel_gate: need at least one case");
    if (samples < 1000000) throw ConfigError("kernel_gate: need at least 10^6 samples per case");
    std::vector<KernelGateRow> rows;
    for (MomentForm form : {MomentForm::I3Relu, MomentForm::I3Erf, MomentForm::I2Relu, MomentForm::I2Erf,
                            MomentForm::Delta2Perceptron}) {
        const int d = moments::dimension(form);
        KernelGateRow row;
        row.kernel = std::string(moments::to_string(form));
        row.cases = cases;
        GaussianStream g(seed, 5000 + static_cast<std::uint64_t>(form));
        for (int c = 0; c < cases; ++c) {
            Eigen::MatrixXd a(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) a(i, j) = g.next();
            const Eigen::MatrixXd cov = a * a.transpose() / d;
            double closed = 0.0;
            switch (form) {
                case MomentForm::I3Relu:
                case MomentForm::I3Erf: {
                    const auto act = form == MomentForm::I3Relu ? ActivationKind::ReLU : ActivationKind::Erf;
                    closed = moments::i3(act, {cov(0, 0), cov(0, 1), cov(0, 2), cov(1, 1), cov(1, 2), cov(2, 2)});
                    break;
                }
                case MomentForm::I2Relu:
                case MomentForm::I2Erf: {
                    const auto act = form == MomentForm::I2Relu ? ActivationKind::ReLU : ActivationKind::Erf;
                    closed = moments::i2(act, {cov(0, 0), cov(1, 1), cov(0, 1)});
                    break;
                }
                case MomentForm::Delta2Perceptron:
                    closed = moments::delta2_perceptron(cov(0, 0), cov(0, 1), cov(1, 1));
                    break;
            }
            const auto mc = moments::mc_average(form, cov, samples, seed * 1000003ULL + static_cast<std::uint64_t>(c));
            const double diff = std::fabs(closed - mc.mean);
            const double z = mc.stderr_mean > 0 ? diff / mc.stderr_mean : (diff == 0 ? 0.0 : INFINITY);
            row.max_z = std::max(row.max_z, z);
            if (z <= 4.0) ++row.within;
        }
        row.pass = row.within >= 0.99 * cases;
        rows.push_back(row);
    }
    return rows;
}

OrderParameters random_state(int k, int m, std::uint64_t seed) {
    GaussianStream g(seed, 6000);
    OrderParameters s = OrderParameters::zeros(k, m);
    Eigen::MatrixXd w(k, k);
    for (int i = 0; i < k; ++i)
        for (int n = 0; n < m; ++n) s.R(i, n) = 0.35 * g.next();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) w(i, j) = 0.35 * g.next();
    s.Q = s.R * s.R.transpose() + w * w.transpose() + 0.05 * Eigen::MatrixXd::Identity(k, k);
    s.Q = 0.5 * (s.Q + s.Q.transpose()).eval();
    return s;
}

std::vector<DriftRow> drift_oracle(int states, int n, long long samples, std::uint64_t seed) {
    constexpr double kEta = 1e-3;
    std::vector<DriftRow> rows;
    for (int s = 0; s < states; ++s) {
        DriftRow row;
        row.K = 1 + s % 3;
        row.M = 1 + (s / 3) % 3;
        row.activation = s % 2 == 0 ? ActivationKind::ReLU : ActivationKind::Erf;
        const OrderParameters state = random_state(row.K, row.M, seed + static_cast<std::uint64_t>(s));
        micro::SimConfig sc;
        sc.N = n;
        sc.K = row.K;
        sc.M = row.M;
        sc.eta = kEta;
        sc.activation = row.activation;
        sc.seed = seed + static_cast<std::uint64_t>(s);
        const auto drift = micro::empirical_drift(state, sc, samples);
        const Eigen::VectorXd rhs =
            analysis::flat_rhs(state, NetConfig{row.K, row.M, kEta, row.activation, Eta2Mode::Off});
        for (Eigen::Index i = 0; i < rhs.size(); ++i) {
            const double z = std::fabs(drift.mean(i) - rhs(i)) / kEta / (drift.stderr_mean(i) / kEta);
            row.max_z = std::max(row.max_z, z);
        }
        row.pass = row.max_z <= 4.0;
        rows.push_back(row);
    }
    return rows;
}

SelfAveraging self_averaging(int seeds, int n_small, int n_large, double alpha) {
    if (seeds < 2) throw ConfigError("self_averaging: need at least 2 seeds");
    SelfAveraging out;
    out.alpha = alpha;
    for (int n : {n_small, n_large}) {
        std::vector<double> r;
        for (int s = 1; s <= seeds; ++s) {
            ExperimentConfig c = fig1_config(0.1);
            c.n_dim = n;
            c.seed = static_cast<std::uint64_t>(s);
            c.steps = static_cast<long long>(std::llround(alpha * n));
            c.measure_stride = c.steps;
            r.push_back(micro::run(c.sim_config(), c.initial).back().state.R(0, 0));
        }
        double mean = 0.0;
        for (double v : r) mean += v;
        mean /= static_cast<double>(r.size());
        double var = 0.0;
        for (double v : r) var += (v - mean) * (v - mean);
        var /= static_cast<double>(r.size() - 1);
        (n == n_small ? out.var_small : out.var_large) = var;
    }
    out.ratio = out.var_small / out.var_large;
    return out;
}

}  // namespace scm::experiments
