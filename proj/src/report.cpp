#include "scmlab/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scmlab/errors.hpp"

namespace scm {

const Check& Report::add(Check c) {
    checks_.push_back(std::move(c));
    return checks_.back();
}

const Check& Report::near(const std::string& name, double expected, double got, double tolerance) {
    return add({name, expected, got, tolerance, "abs", std::fabs(got - expected) <= tolerance});
}

const Check& Report::at_most(const std::string& name, double bound, double got) {
    return add({name, bound, got, 0.0, "le", got <= bound});
}

const Check& Report::at_least(const std::string& name, double bound, double got) {
    return add({name, bound, got, 0.0, "ge", got >= bound});
}

const Check& Report::above(const std::string& name, double bound, double got) {
    return add({name, bound, got, 0.0, "gt", got > bound});
}

const Check& Report::holds(const std::string& name, bool ok) {
    return add({name, 1.0, ok ? 1.0 : 0.0, 0.0, "abs", ok});
}

void Report::merge(const Report& other) {
    checks_.insert(checks_.end(), other.checks_.begin(), other.checks_.end());
    notes_.insert(notes_.end(), other.notes_.begin(), other.notes_.end());
}

bool Report::all_pass() const {
    for (const auto& c : checks_)
        if (!c.pass) return false;
    return true;
}

std::string Report::text() const {
    std::size_t width = 4;
    for (const auto& c : checks_) width = std::max(width, c.name.size());
    std::ostringstream o;
    if (!title_.empty()) o << title_ << "\n\n";
    char line[512];
    std::snprintf(line, sizeof line, "%-*s  %-4s  %14s  %14s  %10s  %s\n", static_cast<int>(width), "check", "rel",
                  "expected", "got", "tolerance", "result");
    o << line;
    for (const auto& c : checks_) {
        std::snprintf(line, sizeof line, "%-*s  %-4s  %14.6g  %14.6g  %10.3g  %s\n", static_cast<int>(width),
                      c.name.c_str(), c.relation.c_str(), c.expected, c.got, c.tolerance, c.pass ? "PASS" : "FAIL");
        o << line;
    }
    if (!notes_.empty()) {
        o << "\n";
        for (const auto& n : notes_) o << n << "\n";
    }
    std::size_t failed = 0;
    for (const auto& c : checks_) failed += c.pass ? 0 : 1;
    o << "\n" << (failed == 0 ? "PASS" : "FAIL") << ": " << checks_.size() - failed << "/" << checks_.size()
      << " checks passed\n";
    return o.str();
}

std::string Report::jsonl() const {
    std::string out;
    for (const auto& c : checks_) {
        nlohmann::ordered_json j;
        j["name"] = c.name;
        j["expected"] = c.expected;
        j["got"] = c.got;
        j["tolerance"] = c.tolerance;
        j["pass"] = c.pass;
        j["relation"] = c.relation;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void Report::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream t(dir / "report.txt", std::ios::binary);
    std::ofstream j(dir / "report.jsonl", std::ios::binary);
    if (!t || !j) throw ConfigError("cannot write report files in " + dir.string());
    t << text();
    j << jsonl();
}

}  // namespace scm
