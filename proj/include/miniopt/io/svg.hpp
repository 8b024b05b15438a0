#pragma once

// Standalone SVG emitters (line plot with optional log-y axis, and a matrix
// heatmap). Byte-deterministic for identical inputs: fixed layout, fixed
// palette, shortest-round-trip number formatting.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "miniopt/dense_matrix.hpp"
#include "miniopt/io/csv.hpp"

namespace miniopt::io {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlotOptions {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  bool log_y = false;
  double log_floor = 1e-300;  // values at or below 0 clamp here under log_y
};

namespace detail {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

inline std::string fmt_coord(double v) {
  // two decimals is plenty for pixel coordinates and keeps files small
  const double r = std::round(v * 100.0) / 100.0;
  return fmt_double(r);
}

}  // namespace detail

inline void emit_svg_lineplot(std::span<const Series> series, const LinePlotOptions& opts,
                              const std::filesystem::path& path) {
  if (series.empty()) throw std::invalid_argument("emit_svg_lineplot: no series");
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("emit_svg_lineplot: x/y mismatch");
    if (s.x.empty()) throw std::invalid_argument("emit_svg_lineplot: empty series");
  }

  const double width = 820.0, height = 520.0;
  const double left = 70.0, right = 790.0, top = 40.0, bottom = 470.0;

  const auto y_value = [&](double v) {
    if (!opts.log_y) return v;
    return std::log10(std::max(v, opts.log_floor));
  };

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      const double yv = y_value(s.y[i]);
      y_min = std::min(y_min, yv);
      y_max = std::max(y_max, yv);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1.0;
  if (y_max <= y_min) y_max = y_min + 1.0;

  const auto px = [&](double v) { return left + (v - x_min) / (x_max - x_min) * (right - left); };
  const auto py = [&](double v) {
    return bottom - (y_value(v) - y_min) / (y_max - y_min) * (bottom - top);
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_svg_lineplot: cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  if (!opts.title.empty()) {
    out << "<text x=\"" << (width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">"
        << opts.title << "</text>\n";
  }
  // axes
  out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double fx = x_min + (x_max - x_min) * k / 5.0;
    const double fy = y_min + (y_max - y_min) * k / 5.0;
    const double xp = left + (right - left) * k / 5.0;
    const double yp = bottom - (bottom - top) * k / 5.0;
    out << "<line x1=\"" << detail::fmt_coord(xp) << "\" y1=\"" << bottom << "\" x2=\""
        << detail::fmt_coord(xp) << "\" y2=\"" << (bottom + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << detail::fmt_coord(xp) << "\" y=\"" << (bottom + 20)
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << fmt_double(fx) << "</text>\n";
    out << "<line x1=\"" << (left - 5) << "\" y1=\"" << detail::fmt_coord(yp) << "\" x2=\"" << left
        << "\" y2=\"" << detail::fmt_coord(yp) << "\" stroke=\"black\"/>\n";
    const std::string y_text = opts.log_y ? ("1e" + fmt_double(fy)) : fmt_double(fy);
    out << "<text x=\"" << (left - 8) << "\" y=\"" << detail::fmt_coord(yp + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << y_text
        << "</text>\n";
  }
  out << "<text x=\"" << ((left + right) / 2) << "\" y=\"" << (height - 8)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << opts.x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << ((top + bottom) / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 16 "
      << ((top + bottom) / 2) << ")\">" << opts.y_label << (opts.log_y ? " (log10)" : "")
      << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = detail::kPalette[si % std::size(detail::kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      out << detail::fmt_coord(px(s.x[i])) << ',' << detail::fmt_coord(py(s.y[i]));
    }
    out << "\"/>\n";
    // legend entry
    const double ly = top + 16.0 * static_cast<double>(si);
    out << "<line x1=\"" << (right - 150) << "\" y1=\"" << detail::fmt_coord(ly) << "\" x2=\""
        << (right - 130) << "\" y2=\"" << detail::fmt_coord(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << (right - 125) << "\" y=\"" << detail::fmt_coord(ly + 4)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

// Magnitude heatmap of a matrix; sqrt intensity scaling makes the
// near-block-diagonal structure visible next to dominant diagonals.
inline void emit_svg_heatmap(const linalg::DenseMatrix& m, const std::string& title,
                             const std::filesystem::path& path) {
  if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("emit_svg_heatmap: empty matrix");
  const double cell = std::max(1.0, std::floor(640.0 / static_cast<double>(std::max(m.rows(), m.cols()))));
  const double width = cell * static_cast<double>(m.cols()) + 40.0;
  const double height = cell * static_cast<double>(m.rows()) + 60.0;
  const double max_abs = std::max(m.max_abs(), 1e-300);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_svg_heatmap: cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << (width / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\" "
         "font-family=\"sans-serif\">"
      << title << "</text>\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double intensity = std::sqrt(std::fabs(m(i, j)) / max_abs);
      const int level = 255 - static_cast<int>(std::lround(intensity * 255.0));
      char color[8];
      std::snprintf(color, sizeof(color), "#%02x%02x%02x", level, level, level);
      out << "<rect x=\"" << detail::fmt_coord(20.0 + cell * static_cast<double>(j)) << "\" y=\""
          << detail::fmt_coord(40.0 + cell * static_cast<double>(i)) << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << color << "\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace miniopt::io
