#pragma once

#include "solar/analytics.hpp"

#include <string>
#include <vector>

namespace solar {

/// Heatmap with one rect per defined cell, color ramped over [0, 1] (win
/// rates) or over the data range (counts). Undefined cells render gray.
std::string svg_heatmap(const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::vector<std::vector<std::optional<double>>>& values,
                        const std::string& title, bool fixed_unit_range);

std::string svg_heatmap(const WinRateMatrix& matrix, const std::string& title);
std::string svg_heatmap(const Mat& matrix, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;  // optional per-point label
  int series = 0;
};

std::string svg_scatter(const std::vector<ScatterPoint>& points, const std::string& title,
                        const std::string& x_label, const std::string& y_label);

}  // namespace solar
