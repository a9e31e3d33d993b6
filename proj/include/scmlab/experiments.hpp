#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "scmlab/config.hpp"
#include "scmlab/macro.hpp"
#include "scmlab/report.hpp"

namespace scm::experiments {

/// Registered experiments:
///   fig1   perceptron, ReLU, eta2 = perceptron, (R, Q)(0) = (0, 0.25);
///          ODE for eta in {0.05, 0.1, 0.5, 1.0, 1.9} (a set straddling the
///          critical learning rate 2) plus a simulation at eta = 0.1, N = 1000.
///   fig2   K = M = 2, ReLU, eta = 0.1, R_in = 1e-3 delta_in, Q = diag(0.2, 0.3);
///          ODE plus a simulation at N = 10^4 up to alpha = 500.
///   fig3   K = 3, M = 2, eta = 0.1, R_11 = 1e-3, Q = diag(0.2, 0.3, 0.25), ReLU
///          and erf.
///   table1 asymptotic Q of the fig3 runs.
///   fig4   K = 2, M = 3, ReLU, eta = 0.1, R_11 = 1e-3, Q = 0.2 I.
struct ExperimentInfo {
    std::string name;
    std::string description;
};
const std::vector<ExperimentInfo>& registry();

/// The runs an experiment is made of; throws ConfigError for unknown names.
std::vector<ExperimentConfig> configs(const std::string& name);

struct ReproduceOptions {
    std::filesystem::path out_dir = "results";
    int sim_n = 0;               ///< overrides the simulation N when > 0
    double sim_alpha_max = 0.0;  ///< overrides the simulation length when > 0
    std::uint64_t seed = 1;
    bool run_sim = true;
    bool write_files = true;
};

/// Runs an experiment, writes CSV/SVG/report files under out_dir/<name> and
/// returns the report. `log` (may be null) receives progress lines.
Report reproduce(const std::string& name, const ReproduceOptions& opt, std::ostream* log = nullptr);

/// Checks shared by `reproduce` and the acceptance tests.
Report perceptron_spectrum(const std::vector<double>& etas, double tol = 1e-6);
Report critical_rate(double tol = 1e-3);
/// Plateau of the fig2 ODE run and the linearization at the symmetric
/// fixed point found from the guess R_in = 0.5, Q = [[0.7, 0.4], [0.4, 0.7]].
Report plateau_analysis();
/// max |ε_g(sim) − ε_g(ODE)| ≤ 5/√N for one run: fig1 (η = 0.1), fig2,
/// fig3_relu, fig3_erf or fig4.
Report macro_micro(const std::string& name, int n, double sim_alpha_max, std::uint64_t seed);
Report table_asymptotics();
Report unrealizable();

/// max over sim samples of |ε_g(sim) − ε_g(ode)|, the ODE linearly
/// interpolated at the simulation α values.
double max_eps_deviation(const Trajectory& sim, const Trajectory& ode);

/// Closed-form kernels against the Monte-Carlo oracle on `cases` random
/// covariances per kernel, `samples` draws each.
struct KernelGateRow {
    std::string kernel;
    int cases = 0;
    int within = 0;       ///< cases with |closed − mc| ≤ 4 stderr
    double max_z = 0;     ///< worst deviation in stderr units
    bool pass = false;    ///< within ≥ 0.99 cases
};
std::vector<KernelGateRow> kernel_gate(int cases, long long samples, std::uint64_t seed);

/// rhs against the micro single-step drift at random valid states
/// (K, M ≤ 3, alternating ReLU/erf, eta2 off, η = 1e-3, compared after
/// dividing both by η).
struct DriftRow {
    int K = 0, M = 0;
    ActivationKind activation = ActivationKind::ReLU;
    double max_z = 0;
    bool pass = false;  ///< every component within 4 stderr
};
std::vector<DriftRow> drift_oracle(int states, int n, long long samples, std::uint64_t seed);
/// Random state with T = I and Q − R Rᵀ positive definite.
OrderParameters random_state(int k, int m, std::uint64_t seed);

/// Variance of R across seeds 1..seeds at alpha for the fig1 setup, at
/// N = n_small and N = n_large.
struct SelfAveraging {
    double alpha = 0;
    double var_small = 0;
    double var_large = 0;
    double ratio = 0;
};
SelfAveraging self_averaging(int seeds, int n_small, int n_large, double alpha);

}  // namespace scm::experiments
