#include "scmlab/trajectory_csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scm {

namespace {

void append_number(std::string& out, double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> f;
    std::size_t pos = 0;
    while (true) {
        const auto c = line.find(',', pos);
        f.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
        if (c == std::string_view::npos) break;
        pos = c + 1;
    }
    return f;
}

double number(std::string_view s, int line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("not a number: '" + std::string(s) + "'", line);
    return v;
}

}  // namespace

std::vector<std::string> csv_header(int k, int m) {
    std::vector<std::string> h{"alpha"};
    for (auto& n : flat_names(k, m)) h.push_back(n);
    h.push_back("eps_g");
    h.push_back("source");
    return h;
}

std::string format_csv(const Trajectory& traj) {
    const int k = traj.config.K, m = traj.config.M;
    std::string out;
    const auto header = csv_header(k, m);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    const std::string_view src = to_string(traj.source);
    for (const auto& s : traj.samples) {
        append_number(out, s.alpha);
        const Eigen::VectorXd x = flatten(s.state);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            out += ',';
            append_number(out, x(i));
        }
        out += ',';
        append_number(out, s.eps_g);
        out += ',';
        out += src;
        out += '\n';
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << format_csv(traj);
}

Trajectory parse_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (lines.empty()) throw ParseError("empty CSV", 1);

    const auto head = split(lines[0]);
    int k = 0, m = 0;
    for (const auto& h : head) {
        int a = 0, b = 0;
        if (h.size() > 2 && h[0] == 'R' && h[1] == '_' &&
            std::sscanf(std::string(h).c_str(), "R_%d_%d", &a, &b) == 2) {
            k = std::max(k, a);
            m = std::max(m, b);
        }
    }
    if (k < 1 || m < 1) throw ParseError("header has no R_i_n columns", 1);
    const auto expect = csv_header(k, m);
    if (head.size() != expect.size()) throw ParseError("header has the wrong number of columns", 1);
    for (std::size_t i = 0; i < expect.size(); ++i)
        if (head[i] != expect[i])
            throw ParseError("header column " + std::to_string(i + 1) + " is '" + std::string(head[i]) +
                                 "', expected '" + expect[i] + "'",
                             1);

    Trajectory traj;
    traj.config.K = k;
    traj.config.M = m;
    traj.initial = OrderParameters::zeros(k, m);
    const OrderParameters like = traj.initial;
    const int nflat = flat_size(k, m);
    bool have_source = false;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const int line = static_cast<int>(li + 1);
        const auto f = split(lines[li]);
        if (f.size() != expect.size())
            throw ParseError("expected " + std::to_string(expect.size()) + " fields, got " + std::to_string(f.size()),
                             line);
        TrajectorySample s;
        s.alpha = number(f[0], line);
        Eigen::VectorXd x(nflat);
        for (int i = 0; i < nflat; ++i) x(i) = number(f[1 + i], line);
        s.state = unflatten(x, like);
        s.eps_g = number(f[1 + nflat], line);
        TrajectorySource src;
        if (f.back() == "ode")
            src = TrajectorySource::Ode;
        else if (f.back() == "sim")
            src = TrajectorySource::Sim;
        else
            throw ParseError("source must be ode or sim", line);
        if (have_source && src != traj.source) throw ParseError("mixed source column", line);
        traj.source = src;
        have_source = true;
        if (!traj.samples.empty() && s.alpha < traj.samples.back().alpha)
            throw ParseError("alpha decreases", line);
        traj.samples.push_back(std::move(s));
    }
    if (!traj.samples.empty()) traj.initial = traj.samples.front().state;
    return traj;
}

Trajectory read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

}  // namespace scm
