#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scmlab/macro.hpp"

namespace scm {

/// Header: alpha, R_i_n (row-major), Q_i_k (upper triangle, row-major),
/// eps_g, source. Numbers use %.17g, fields are comma separated, rows end in
/// '\n'.
std::vector<std::string> csv_header(int k, int m);
std::string format_csv(const Trajectory& traj);
void write_csv(const std::filesystem::path& path, const Trajectory& traj);

/// Parses `format_csv` output. K and M are recovered from the header, T is
/// the identity and only config.K/config.M of the result are meaningful.
/// Throws ParseError (1-based line) on a malformed header or row, a mixed
/// `source` column, or decreasing alpha.
Trajectory parse_csv(std::string_view text);
Trajectory read_csv(const std::filesystem::path& path);

}  // namespace scm
