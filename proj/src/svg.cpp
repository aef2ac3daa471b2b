#include "solar/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace solar {

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// White-to-blue ramp.
std::string ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r = static_cast<int>(std::lround(255.0 - 200.0 * t));
  int g = static_cast<int>(std::lround(255.0 - 150.0 * t));
  int b = 255;
  std::ostringstream out;
  out << "rgb(" << r << ',' << g << ',' << b << ')';
  return out.str();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

}  // namespace

std::string svg_heatmap(const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::vector<std::vector<std::optional<double>>>& values,
                        const std::string& title, bool fixed_unit_range) {
  const double cell = 36;
  const double left = 260;
  const double top = 60;
  const double width = left + cell * static_cast<double>(col_labels.size()) + 20;
  const double height = top + cell * static_cast<double>(row_labels.size()) + 40;

  double lo = 0.0;
  double hi = 1.0;
  if (!fixed_unit_range) {
    lo = 1e300;
    hi = -1e300;
    for (const auto& row : values) {
      for (const auto& v : row) {
        if (!v) continue;
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
    if (lo > hi) {
      lo = 0;
      hi = 1;
    }
    if (hi == lo) hi = lo + 1;
  }

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"10\" y=\"22\" font-size=\"15\">" << xml_escape(title) << "</text>\n";

  for (std::size_t col = 0; col < col_labels.size(); ++col) {
    double x = left + cell * static_cast<double>(col) + cell / 2;
    out << "<text x=\"" << x << "\" y=\"" << top - 8
        << "\" text-anchor=\"middle\">" << xml_escape(col_labels[col]) << "</text>\n";
  }

  for (std::size_t row = 0; row < row_labels.size(); ++row) {
    double y = top + cell * static_cast<double>(row);
    out << "<text x=\"" << left - 8 << "\" y=\"" << y + cell / 2 + 4
        << "\" text-anchor=\"end\">" << xml_escape(row_labels[row]) << "</text>\n";
    for (std::size_t col = 0; col < col_labels.size(); ++col) {
      double x = left + cell * static_cast<double>(col);
      const auto& v = values[row][col];
      std::string fill = v ? ramp_color((*v - lo) / (hi - lo)) : "rgb(235,235,235)";
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell - 2 << "\" height=\""
          << cell - 2 << "\" fill=\"" << fill << "\"/>\n";
      if (v) {
        out << "<text x=\"" << x + cell / 2 - 1 << "\" y=\"" << y + cell / 2 + 4
            << "\" text-anchor=\"middle\">" << fmt(*v) << "</text>\n";
      }
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_heatmap(const WinRateMatrix& matrix, const std::string& title) {
  std::vector<std::vector<std::optional<double>>> values;
  for (const auto& row : matrix.cells) {
    std::vector<std::optional<double>> out_row;
    for (const auto& cell : row) {
      out_row.push_back(cell ? std::optional<double>(cell->rate) : std::nullopt);
    }
    values.push_back(std::move(out_row));
  }
  return svg_heatmap(matrix.pair_labels, matrix.redditor_ids, values, title, true);
}

std::string svg_heatmap(const Mat& matrix, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title) {
  std::vector<std::vector<std::optional<double>>> values;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    std::vector<std::optional<double>> row;
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) row.push_back(matrix(i, j));
    values.push_back(std::move(row));
  }
  return svg_heatmap(row_labels, col_labels, values, title, false);
}

std::string svg_scatter(const std::vector<ScatterPoint>& points, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
  const double width = 560;
  const double height = 420;
  const double left = 70;
  const double right = 20;
  const double top = 46;
  const double bottom = 50;

  double x_lo = 1e300;
  double x_hi = -1e300;
  double y_lo = 1e300;
  double y_hi = -1e300;
  for (const ScatterPoint& p : points) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  if (points.empty()) {
    x_lo = y_lo = 0;
    x_hi = y_hi = 1;
  }
  if (x_hi == x_lo) x_hi = x_lo + 1;
  if (y_hi == y_lo) y_hi = y_lo + 1;

  auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right); };
  auto sy = [&](double y) {
    return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom);
  };

  static const char* palette[] = {"#3366cc", "#dc3912", "#ff9900", "#109618", "#990099",
                                  "#0099c6", "#dd4477", "#66aa00"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"10\" y=\"22\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right
      << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << (top + height - bottom) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (top + height - bottom) / 2
      << ")\">" << xml_escape(y_label) << "</text>\n";
  out << "<text x=\"" << left << "\" y=\"" << height - bottom + 16 << "\">" << fmt(x_lo)
      << "</text>\n";
  out << "<text x=\"" << width - right << "\" y=\"" << height - bottom + 16
      << "\" text-anchor=\"end\">" << fmt(x_hi) << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << height - bottom
      << "\" text-anchor=\"end\">" << fmt(y_lo) << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << top + 6 << "\" text-anchor=\"end\">" << fmt(y_hi)
      << "</text>\n";

  for (const ScatterPoint& p : points) {
    const char* color = palette[static_cast<std::size_t>(p.series) % 8];
    out << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\"3.5\" fill=\"" << color
        << "\" fill-opacity=\"0.75\"/>\n";
    if (!p.label.empty()) {
      out << "<text x=\"" << sx(p.x) + 5 << "\" y=\"" << sy(p.y) - 5 << "\">"
          << xml_escape(p.label) << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace solar
