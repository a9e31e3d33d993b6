#include "scmlab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "scmlab/errors.hpp"

namespace scm {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

std::string tick_label(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%g", std::fabs(v) < 1e-12 ? 0.0 : v);
    return b;
}

// 1-2-5 ticks covering [lo, hi].
std::vector<double> linear_ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + 1e-9 * step; v += step) t.push_back(v);
    return t;
}

}  // namespace

std::string render_svg(const std::vector<Series>& series, const PlotOptions& opt) {
    const double ml = 70, mr = 150, mt = 40, mb = 55;
    const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;

    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!opt.log_y || y > 0.0);
    };
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) {
                const double y = opt.log_y ? std::log10(s.y[i]) : s.y[i];
                xlo = std::min(xlo, s.x[i]);
                xhi = std::max(xhi, s.x[i]);
                ylo = std::min(ylo, y);
                yhi = std::max(yhi, y);
            }
    if (!std::isfinite(xlo)) {
        xlo = 0;
        xhi = 1;
        ylo = 0;
        yhi = 1;
    }
    if (xhi - xlo <= 0) xhi = xlo + 1;
    if (yhi - ylo <= 0) {
        ylo -= 0.5;
        yhi += 0.5;
    }
    if (opt.log_y) {
        ylo = std::floor(ylo);
        yhi = std::ceil(yhi);
        if (yhi == ylo) yhi += 1;
    } else {
        const double pad = 0.05 * (yhi - ylo);
        ylo -= pad;
        yhi += pad;
    }
    auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
    auto py = [&](double y) { return mt + (yhi - y) / (yhi - ylo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
      << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<text x=\"" << num(ml + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(opt.title)
      << "</text>\n";

    for (double t : linear_ticks(xlo, xhi)) {
        o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(px(t)) << "\" y2=\""
          << num(mt + ph) << "\" stroke=\"#e0e0e0\"/>\n";
        o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(mt + ph + 16) << "\" text-anchor=\"middle\">"
          << tick_label(t) << "</text>\n";
    }
    const std::vector<double> yt = opt.log_y ? [&] {
        std::vector<double> d;
        const int every = std::max(1, static_cast<int>(std::ceil((yhi - ylo) / 8.0)));
        for (double v = ylo; v <= yhi + 1e-9; v += every) d.push_back(v);
        return d;
    }()
                                             : linear_ticks(ylo, yhi);
    for (double t : yt) {
        o << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(ml + pw) << "\" y2=\""
          << num(py(t)) << "\" stroke=\"#e0e0e0\"/>\n";
        const std::string label = opt.log_y ? "1e" + tick_label(t) : tick_label(t);
        o << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << label
          << "</text>\n";
    }
    o << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(opt.height - 12) << "\" text-anchor=\"middle\">"
      << escape(opt.xlabel) << "</text>\n";
    o << "<text transform=\"translate(16," << num(mt + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(opt.ylabel) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            const double y = opt.log_y ? std::log10(s.y[i]) : s.y[i];
            if (!first) o << ' ';
            o << num(px(s.x[i])) << ',' << num(py(y));
            first = false;
        }
        o << "\"/>\n";
        const double ly = mt + 10 + 18.0 * static_cast<double>(si);
        o << "<line x1=\"" << num(ml + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(ml + pw + 36)
          << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << num(ml + pw + 42) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label) << "</text>\n";
    }
    o << "</g>\n</svg>\n";
    return o.str();
}

void write_svg(const std::filesystem::path& path, const std::vector<Series>& series, const PlotOptions& opt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << render_svg(series, opt);
}

}  // namespace scm
