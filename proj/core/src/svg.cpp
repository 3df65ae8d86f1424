#include "mxbolo/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mxbolo/error.hpp"

namespace mxbolo {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void pad() {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        } else if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

void frame(std::ostringstream& s, const std::string& title, const std::string& xl, const std::string& yl, Range xr,
           Range yr) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
    s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
      << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = xr.lo + (xr.hi - xr.lo) * k / 4.0;
        const double px = kLeft + (kWidth - kLeft - kRight) * k / 4.0;
        s << "<text x=\"" << px << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << fx
          << "</text>\n";
        const double fy = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        const double py = kHeight - kBottom - (kHeight - kTop - kBottom) * k / 4.0;
        s << "<text x=\"" << kLeft - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << fy << "</text>\n";
    }
    s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(xl)
      << "</text>\n";
    s << "<text transform=\"translate(16," << kHeight / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(yl)
      << "</text>\n";
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series) {
    Range xr;
    Range yr;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) {
            throw InvalidArgument("line plot series '" + s.label + "' has mismatched x and y");
        }
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
    }
    xr.pad();
    yr.pad();
    const auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight); };
    const auto py = [&](double y) {
        return kHeight - kBottom - (y - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
    };
    std::ostringstream s;
    s.precision(4);
    frame(s, title, x_label, y_label, xr, yr);
    s.precision(6);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kPalette[k % std::size(kPalette)];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            if (std::isfinite(series[k].y[i])) s << px(series[k].x[i]) << ',' << py(series[k].y[i]) << ' ';
        }
        s << "\"/>\n";
        s << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 16 + 14 * k << "\" text-anchor=\"end\" fill=\""
          << color << "\">" << escape(series[k].label) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string heatmap_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<std::vector<double>>& values) {
    if (values.size() != y.size()) {
        throw InvalidArgument("heat map needs one row per y value");
    }
    Range xr;
    Range yr;
    Range vr;
    for (double v : x) xr.add(v);
    for (double v : y) yr.add(v);
    for (const auto& row : values) {
        if (row.size() != x.size()) {
            throw InvalidArgument("heat map needs one column per x value");
        }
        for (double v : row) vr.add(v);
    }
    xr.pad();
    yr.pad();
    vr.pad();
    std::ostringstream s;
    s.precision(4);
    frame(s, title, x_label, y_label, xr, yr);
    s.precision(6);
    const double cw = (kWidth - kLeft - kRight) / static_cast<double>(std::max<std::size_t>(x.size(), 1));
    const double ch = (kHeight - kTop - kBottom) / static_cast<double>(std::max<std::size_t>(y.size(), 1));
    for (std::size_t r = 0; r < values.size(); ++r) {
        for (std::size_t c = 0; c < x.size(); ++c) {
            const double v = values[r][c];
            const int shade = std::isfinite(v) ? static_cast<int>(std::lround(255.0 * (v - vr.lo) / (vr.hi - vr.lo))) : 0;
            s << "<rect x=\"" << kLeft + cw * static_cast<double>(c) << "\" y=\""
              << kHeight - kBottom - ch * static_cast<double>(r + 1) << "\" width=\"" << cw + 0.5 << "\" height=\""
              << ch + 0.5 << "\" fill=\"rgb(" << shade << ',' << shade << ',' << 255 - shade / 2 << ")\"/>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace mxbolo
