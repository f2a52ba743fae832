#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "cwm/csv.hpp"
#include "cwm/errors.hpp"

namespace cwm {

/**
 * Hand-rolled SVG output.  CSV files are the canonical experiment artifact;
 * these plots are conveniences for eyeballing a run, so only polylines and
 * cell grids are supported.
 */
namespace svg {

struct Series {
  std::vector<double> x, y;
  std::string color = "#000000";
  double width = 1.0;
};

inline void write_line_chart(const std::string& path, const std::vector<Series>& series,
                             const std::string& title = "") {
  const double w = 860, h = 420, ml = 60, mr = 20, mt = 30, mb = 40;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double px = (w - ml - mr) / (xmax - xmin);
  const double py = (h - mt - mb) / (ymax - ymin);

  std::ofstream f(path);
  if (!f) throw ContractError("svg: cannot open " + path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<rect x='" << ml << "' y='" << mt << "' width='" << (w - ml - mr) << "' height='"
    << (h - mt - mb) << "' fill='none' stroke='#888'/>\n";
  if (!title.empty())
    f << "<text x='" << w / 2 << "' y='18' font-size='13' text-anchor='middle'>" << title
      << "</text>\n";
  f << "<text x='8' y='" << mt + 8 << "' font-size='11'>" << format_double(ymax) << "</text>\n";
  f << "<text x='8' y='" << h - mb << "' font-size='11'>" << format_double(ymin) << "</text>\n";
  f << "<text x='" << ml << "' y='" << h - 8 << "' font-size='11'>" << format_double(xmin)
    << "</text>\n";
  f << "<text x='" << w - mr - 40 << "' y='" << h - 8 << "' font-size='11'>" << format_double(xmax)
    << "</text>\n";
  for (const auto& s : series) {
    f << "<polyline fill='none' stroke='" << s.color << "' stroke-width='" << s.width
      << "' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double sx = ml + (s.x[i] - xmin) * px;
      const double sy = h - mb - (s.y[i] - ymin) * py;
      f << format_double(sx) << ',' << format_double(sy) << ' ';
    }
    f << "'/>\n";
  }
  f << "</svg>\n";
}

/// Diverging blue-white-red map for values in [-lim, lim].
inline std::string diverging_color(double v, double lim) {
  double t = std::clamp(v / lim, -1.0, 1.0);
  int r, g, b;
  if (t >= 0) {
    r = 255;
    g = b = static_cast<int>(std::lround(255 * (1.0 - t)));
  } else {
    b = 255;
    r = g = static_cast<int>(std::lround(255 * (1.0 + t)));
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

/// values[i][j] drawn with row index i upward, column index j rightward.
inline void write_heatmap(const std::string& path, const std::vector<std::vector<double>>& values,
                          double lim, const std::string& title = "") {
  const std::size_t nr = values.size();
  const std::size_t nc = nr ? values[0].size() : 0;
  const double cell = 28, ml = 40, mt = 30;
  const double w = ml + nc * cell + 20, h = mt + nr * cell + 20;
  std::ofstream f(path);
  if (!f) throw ContractError("svg: cannot open " + path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  if (!title.empty())
    f << "<text x='" << w / 2 << "' y='18' font-size='13' text-anchor='middle'>" << title
      << "</text>\n";
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      const double x = ml + j * cell;
      const double y = mt + (nr - 1 - i) * cell;
      f << "<rect x='" << x << "' y='" << y << "' width='" << cell << "' height='" << cell
        << "' fill='" << diverging_color(values[i][j], lim) << "' stroke='#ccc'/>\n";
    }
  f << "</svg>\n";
}

}  // namespace svg
}  // namespace cwm
