#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace scm {

/// One checked quantity. `relation` is how `got` is compared:
///   "abs"  |got − expected| ≤ tolerance
///   "le"   got ≤ expected
///   "ge"   got ≥ expected
///   "gt"   got > expected
struct Check {
    std::string name;
    double expected = 0;
    double got = 0;
    double tolerance = 0;
    std::string relation = "abs";
    bool pass = false;
};

class Report {
public:
    explicit Report(std::string title = {}) : title_(std::move(title)) {}

    const Check& near(const std::string& name, double expected, double got, double tolerance);
    const Check& at_most(const std::string& name, double bound, double got);
    const Check& at_least(const std::string& name, double bound, double got);
    const Check& above(const std::string& name, double bound, double got);
    /// A pass/fail predicate recorded as got = 1 or 0 against expected = 1.
    const Check& holds(const std::string& name, bool ok);
    void note(const std::string& line) { notes_.push_back(line); }
    void merge(const Report& other);

    const std::vector<Check>& checks() const { return checks_; }
    bool all_pass() const;

    /// Aligned table plus notes and a final PASS/FAIL line.
    std::string text() const;
    /// One JSON object per check: name, expected, got, tolerance, pass, relation.
    std::string jsonl() const;
    /// Writes report.txt and report.jsonl into `dir`.
    void write(const std::filesystem::path& dir) const;

private:
    const Check& add(Check c);

    std::string title_;
    std::vector<Check> checks_;
    std::vector<std::string> notes_;
};

}  // namespace scm
