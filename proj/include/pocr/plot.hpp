#pragma once

#include <string>
#include <vector>

#include "pocr/imaging.hpp"

namespace pocr {

struct BarSeries {
    std::vector<std::string> labels;
    std::vector<double> values;
    std::vector<double> errors;  // optional, same length as values
};

struct LineSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> errors;  // optional
};

struct PlotOptions {
    int width = 480;
    int height = 320;
    double y_min = 0.0;
    double y_max = 1.0;
};

/// Bars on a white canvas with y gridlines every 0.1 of the range and
/// numeric tick labels; labels are not drawn (they go to the CSV).
Image render_bar_chart(const BarSeries& s, const PlotOptions& opts = {});
/// Polyline with square markers; x is mapped linearly to the plot width.
Image render_line_chart(const std::vector<LineSeries>& series, const PlotOptions& opts = {});

}  // namespace pocr
