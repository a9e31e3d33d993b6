#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "scmlab/micro.hpp"
#include "scmlab/order_parameters.hpp"

namespace scm {

enum class RunMode { Ode, Sim, Both };
std::string_view to_string(RunMode m);
RunMode parse_run_mode(std::string_view s);

/// One experiment: network, initial state, integrator and simulation settings.
///
/// Text form is one `key = value` per line, `#` starts a comment. Keys:
///   name, mode (ode|sim|both), K, M, eta, activation (relu|erf),
///   eta2 (off|perceptron), alpha_max, step, stride,
///   R_i_n, Q_i_k (1-based, i <= k; unspecified entries are 0),
///   n_dim, seed, steps, measure_stride, allow_small_n (true|false).
/// K and M may appear anywhere in the file. T is always the identity.
/// steps = 0 means alpha_max * n_dim; measure_stride = 0 means n_dim / 10.
struct ExperimentConfig {
    std::string name = "run";
    RunMode mode = RunMode::Ode;
    NetConfig net;
    OrderParameters initial = OrderParameters::zeros(1, 1);
    double alpha_max = 100.0;
    double step = 0.01;
    long long stride = 100;

    int n_dim = 1000;
    std::uint64_t seed = 1;
    long long steps = 0;
    long long measure_stride = 0;
    bool allow_small_n = false;

    /// Throws ConfigError on invalid values (shapes, η, step, stride, ...).
    void validate() const;
    micro::SimConfig sim_config() const;
};

/// Throws ParseError (with the 1-based line) on syntax errors, unknown or
/// duplicate keys, bad numbers, non-positive eta/alpha_max/step and
/// out-of-range indices, and ParseError with line 0 when the network or the
/// initial state is invalid as a whole. Simulation settings are left to
/// `validate`.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& c);

}  // namespace scm
