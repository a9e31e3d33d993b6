#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace scm {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string xlabel = "alpha";
    std::string ylabel;
    bool log_y = false;  ///< non-positive values are dropped
    int width = 640;
    int height = 420;
};

/// Standalone SVG line chart with auto-scaled axes and a legend. Output is a
/// pure function of the inputs.
std::string render_svg(const std::vector<Series>& series, const PlotOptions& opt);
void write_svg(const std::filesystem::path& path, const std::vector<Series>& series, const PlotOptions& opt);

}  // namespace scm
