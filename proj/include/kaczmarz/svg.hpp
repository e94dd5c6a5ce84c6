#pragma once

// Dependency-free SVG line plots: axes, gridlines, decade ticks for
// log-scale y, and a small legend. Numeric content is always exported as
// CSV alongside; the SVG exists for eyeballing convergence curves.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "kaczmarz/errors.hpp"

namespace kaczmarz {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;  // skip nonpositive y values when set
  int width = 860;
  int height = 540;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string svg_tick_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline const char* svg_color(std::size_t i) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                             "#9467bd", "#ff7f0e", "#17becf"};
  return kPalette[i % 6];
}

}  // namespace detail

inline void write_line_plot(const std::string& path,
                            const std::vector<PlotSeries>& series,
                            const PlotOptions& opt) {
  if (series.empty()) throw EmptyInput("plot needs at least one series");

  // Collect the drawable points and the data ranges.
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  std::size_t drawable = 0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (opt.log_y && !(y > 0.0)) continue;
      const double yy = opt.log_y ? std::log10(y) : y;
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, yy);
      y_hi = std::max(y_hi, yy);
      ++drawable;
    }
  }
  if (drawable == 0) throw EmptyInput("plot has no drawable points");
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;

  const double ml = 72, mr = 20, mt = 40, mb = 52;  // margins
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) {
    const double yy = opt.log_y ? std::log10(y) : y;
    return mt + (y_hi - yy) / (y_hi - y_lo) * ph;
  };

  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width
      << " " << opt.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << opt.title << "</text>\n";

  // Gridlines and tick labels.
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">\n";
  const int x_ticks = 6;
  for (int k = 0; k <= x_ticks; ++k) {
    const double xv = x_lo + (x_hi - x_lo) * k / x_ticks;
    const double gx = px(xv);
    out << "<line x1=\"" << detail::svg_num(gx) << "\" y1=\"" << mt
        << "\" x2=\"" << detail::svg_num(gx) << "\" y2=\"" << mt + ph
        << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << detail::svg_num(gx) << "\" y=\""
        << detail::svg_num(mt + ph + 16) << "\" text-anchor=\"middle\">"
        << detail::svg_tick_label(xv) << "</text>\n";
  }
  if (opt.log_y) {
    // One tick per decade across the visible range.
    const int d_lo = static_cast<int>(std::floor(y_lo));
    const int d_hi = static_cast<int>(std::ceil(y_hi));
    for (int d = d_lo; d <= d_hi; ++d) {
      const double yy = static_cast<double>(d);
      if (yy < y_lo - 1e-9 || yy > y_hi + 1e-9) continue;
      const double gy = mt + (y_hi - yy) / (y_hi - y_lo) * ph;
      out << "<line x1=\"" << ml << "\" y1=\"" << detail::svg_num(gy)
          << "\" x2=\"" << ml + pw << "\" y2=\"" << detail::svg_num(gy)
          << "\" stroke=\"#ddd\"/>\n"
          << "<text x=\"" << detail::svg_num(ml - 6) << "\" y=\""
          << detail::svg_num(gy + 4) << "\" text-anchor=\"end\">1e" << d
          << "</text>\n";
    }
  } else {
    const int y_ticks = 5;
    for (int k = 0; k <= y_ticks; ++k) {
      const double yv = y_lo + (y_hi - y_lo) * k / y_ticks;
      const double gy = mt + (y_hi - yv) / (y_hi - y_lo) * ph;
      out << "<line x1=\"" << ml << "\" y1=\"" << detail::svg_num(gy)
          << "\" x2=\"" << ml + pw << "\" y2=\"" << detail::svg_num(gy)
          << "\" stroke=\"#ddd\"/>\n"
          << "<text x=\"" << detail::svg_num(ml - 6) << "\" y=\""
          << detail::svg_num(gy + 4) << "\" text-anchor=\"end\">"
          << detail::svg_tick_label(yv) << "</text>\n";
    }
  }
  out << "</g>\n";

  // Axes.
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\""
      << detail::svg_num(pw) << "\" height=\"" << detail::svg_num(ph)
      << "\" fill=\"none\" stroke=\"#333\"/>\n"
      << "<text x=\"" << detail::svg_num(ml + pw / 2) << "\" y=\""
      << opt.height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << opt.x_label << "</text>\n"
      << "<text x=\"18\" y=\"" << detail::svg_num(mt + ph / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 18 "
      << detail::svg_num(mt + ph / 2) << ")\">" << opt.y_label << "</text>\n";

  // Series polylines.
  for (std::size_t si = 0; si < series.size(); ++si) {
    out << "<polyline fill=\"none\" stroke=\"" << detail::svg_color(si)
        << "\" stroke-width=\"1.6\" points=\"";
    for (const auto& [x, y] : series[si].points) {
      if (opt.log_y && !(y > 0.0)) continue;
      out << detail::svg_num(px(x)) << ',' << detail::svg_num(py(y)) << ' ';
    }
    out << "\"/>\n";
  }

  // Legend, top-right inside the plot area.
  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double ly = mt + 14 + 18 * static_cast<double>(si);
    out << "<line x1=\"" << detail::svg_num(ml + pw - 120) << "\" y1=\""
        << detail::svg_num(ly) << "\" x2=\"" << detail::svg_num(ml + pw - 96)
        << "\" y2=\"" << detail::svg_num(ly) << "\" stroke=\""
        << detail::svg_color(si) << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << detail::svg_num(ml + pw - 90) << "\" y=\""
        << detail::svg_num(ly + 4) << "\">" << series[si].label
        << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace kaczmarz
