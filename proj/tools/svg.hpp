#pragma once

#include <string>
#include <vector>

namespace coverlab::svg {

/// One curve of a time-series plot; lo/hi (optional, same length as y) shade a band.
struct Series {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> lo;
    std::vector<double> hi;
};

struct Axes {
    std::string title;
    std::string x_label;
    std::string y_label;
};

std::string line_plot(const Axes& axes, const std::vector<Series>& series);

/// Histogram of `values` with `bins` equal-width bins.
std::string histogram(const Axes& axes, const std::vector<double>& values, int bins, const std::string& color);

/// Heatmap of a rows x cols matrix with row and column labels.
std::string heatmap(const Axes& axes, const std::vector<std::vector<double>>& values,
                    const std::vector<std::string>& row_labels, const std::vector<std::string>& col_labels);

}  // namespace coverlab::svg
