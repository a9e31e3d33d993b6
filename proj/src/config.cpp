#include "scmlab/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace scm {

namespace {

struct Entry {
    std::string key;
    std::string value;
    int line;
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const Entry& e) {
    double v = 0.0;
    const char* end = e.value.data() + e.value.size();
    auto [p, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || p != end) throw ParseError("'" + e.key + "': not a number: " + e.value, e.line);
    return v;
}

double positive(const Entry& e) {
    const double v = to_double(e);
    if (!(v > 0.0) || !std::isfinite(v)) throw ParseError("'" + e.key + "' must be positive", e.line);
    return v;
}

long long to_int(const Entry& e) {
    long long v = 0;
    const char* end = e.value.data() + e.value.size();
    auto [p, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || p != end) throw ParseError("'" + e.key + "': not an integer: " + e.value, e.line);
    return v;
}

bool to_bool(const Entry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ParseError("'" + e.key + "': expected true or false", e.line);
}

// "R_2_1" -> (2, 1); false if the key has another shape.
bool matrix_index(const std::string& key, char prefix, int& a, int& b) {
    if (key.size() < 5 || key[0] != prefix || key[1] != '_') return false;
    const auto mid = key.find('_', 2);
    if (mid == std::string::npos) return false;
    const char* s = key.data();
    auto r1 = std::from_chars(s + 2, s + mid, a);
    auto r2 = std::from_chars(s + mid + 1, s + key.size(), b);
    return r1.ec == std::errc() && r1.ptr == s + mid && r2.ec == std::errc() && r2.ptr == s + key.size();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string_view to_string(RunMode m) {
    switch (m) {
        case RunMode::Ode: return "ode";
        case RunMode::Sim: return "sim";
        case RunMode::Both: return "both";
    }
    return "?";
}

RunMode parse_run_mode(std::string_view s) {
    if (s == "ode") return RunMode::Ode;
    if (s == "sim") return RunMode::Sim;
    if (s == "both") return RunMode::Both;
    throw ConfigError("unknown mode '" + std::string(s) + "' (expected ode, sim or both)");
}

void ExperimentConfig::validate() const {
    net.validate();
    if (initial.students() != net.K || initial.teachers() != net.M)
        throw ConfigError("initial state shape does not match K and M");
    if (!(alpha_max > 0.0)) throw ConfigError("alpha_max must be positive");
    if (!(step > 0.0)) throw ConfigError("step must be positive");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (steps < 0 || measure_stride < 0) throw ConfigError("steps and measure_stride must be >= 0");
    try {
        initial.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("initial state: ") + e.what());
    }
    if (mode != RunMode::Ode) sim_config().validate();
}

micro::SimConfig ExperimentConfig::sim_config() const {
    micro::SimConfig s;
    s.N = n_dim;
    s.K = net.K;
    s.M = net.M;
    s.eta = net.eta;
    s.activation = net.activation;
    s.seed = seed;
    s.allow_small_n = allow_small_n;
    s.steps = steps > 0 ? steps : static_cast<long long>(std::llround(alpha_max * n_dim));
    s.measure_stride = measure_stride > 0 ? measure_stride : std::max(1, n_dim / 10);
    return s;
}

ExperimentConfig parse_config(std::string_view text) {
    std::vector<Entry> entries;
    std::map<std::string, int> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
        Entry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
        if (e.key.empty()) throw ParseError("empty key", line_no);
        if (e.value.empty()) throw ParseError("'" + e.key + "': empty value", line_no);
        if (auto [it, fresh] = seen.emplace(e.key, line_no); !fresh)
            throw ParseError("duplicate key '" + e.key + "' (first on line " + std::to_string(it->second) + ")",
                             line_no);
        entries.push_back(std::move(e));
    }

    ExperimentConfig c;
    for (const auto& e : entries) {
        if (e.key == "K" || e.key == "M") {
            const long long v = to_int(e);
            if (v < 1 || v > 50) throw ParseError("'" + e.key + "' must be in [1, 50]", e.line);
            (e.key == "K" ? c.net.K : c.net.M) = static_cast<int>(v);
        }
    }
    c.initial = OrderParameters::zeros(c.net.K, c.net.M);

    for (const auto& e : entries) {
        const std::string& k = e.key;
        int a = 0, b = 0;
        try {
            if (k == "K" || k == "M") {
                continue;
            } else if (k == "name") {
                c.name = e.value;
            } else if (k == "mode") {
                c.mode = parse_run_mode(e.value);
            } else if (k == "eta") {
                c.net.eta = positive(e);
            } else if (k == "activation") {
                c.net.activation = parse_activation(e.value);
            } else if (k == "eta2") {
                c.net.eta2_mode = parse_eta2_mode(e.value);
            } else if (k == "alpha_max") {
                c.alpha_max = positive(e);
            } else if (k == "step") {
                c.step = positive(e);
            } else if (k == "stride") {
                c.stride = to_int(e);
            } else if (k == "n_dim") {
                c.n_dim = static_cast<int>(to_int(e));
            } else if (k == "seed") {
                const long long s = to_int(e);
                if (s < 0) throw ParseError("'seed' must be >= 0", e.line);
                c.seed = static_cast<std::uint64_t>(s);
            } else if (k == "steps") {
                c.steps = to_int(e);
            } else if (k == "measure_stride") {
                c.measure_stride = to_int(e);
            } else if (k == "allow_small_n") {
                c.allow_small_n = to_bool(e);
            } else if (matrix_index(k, 'R', a, b)) {
                if (a < 1 || a > c.net.K || b < 1 || b > c.net.M)
                    throw ParseError("'" + k + "': index out of range for K=" + std::to_string(c.net.K) +
                                         ", M=" + std::to_string(c.net.M),
                                     e.line);
                c.initial.R(a - 1, b - 1) = to_double(e);
            } else if (matrix_index(k, 'Q', a, b)) {
                if (a < 1 || b > c.net.K || a > b)
                    throw ParseError("'" + k + "': need 1 <= i <= k <= K=" + std::to_string(c.net.K), e.line);
                c.initial.Q(a - 1, b - 1) = c.initial.Q(b - 1, a - 1) = to_double(e);
            } else {
                throw ParseError("unknown key '" + k + "'", e.line);
            }
        } catch (const ConfigError& err) {
            throw ParseError(err.what(), e.line);
        }
    }
    // Simulation settings are checked when a run starts, so command-line
    // overrides can still fix them.
    try {
        c.net.validate();
        c.initial.validate();
    } catch (const Error& err) {
        throw ParseError(err.what(), 0);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

std::string format_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "name = " << c.name << "\n";
    o << "mode = " << to_string(c.mode) << "\n";
    o << "K = " << c.net.K << "\nM = " << c.net.M << "\n";
    o << "eta = " << fmt(c.net.eta) << "\n";
    o << "activation = " << to_string(c.net.activation) << "\n";
    o << "eta2 = " << to_string(c.net.eta2_mode) << "\n";
    o << "alpha_max = " << fmt(c.alpha_max) << "\nstep = " << fmt(c.step) << "\nstride = " << c.stride << "\n";
    for (int i = 0; i < c.net.K; ++i)
        for (int n = 0; n < c.net.M; ++n)
            o << "R_" << i + 1 << "_" << n + 1 << " = " << fmt(c.initial.R(i, n)) << "\n";
    for (int i = 0; i < c.net.K; ++i)
        for (int k = i; k < c.net.K; ++k)
            o << "Q_" << i + 1 << "_" << k + 1 << " = " << fmt(c.initial.Q(i, k)) << "\n";
    o << "n_dim = " << c.n_dim << "\nseed = " << c.seed << "\nsteps = " << c.steps
      << "\nmeasure_stride = " << c.measure_stride << "\nallow_small_n = " << (c.allow_small_n ? "true" : "false")
      << "\n";
    return o.str();
}

}  // namespace scm
