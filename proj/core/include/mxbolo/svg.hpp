#pragma once

// Self-contained SVG renderings of line plots and heat maps.

#include <string>
#include <vector>

namespace mxbolo {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series);

/// values[row][col]; rows drawn bottom to top along y, columns along x.
std::string heatmap_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<std::vector<double>>& values);

}  // namespace mxbolo
