#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Standalone SVG 1.1 line/scatter charts, no external renderer.
namespace ganlab::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool points_only = false;
};

namespace detail {

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
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

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Rounded tick spacing (1/2/5 times a power of ten).
inline double nice_step(double span, int target_ticks) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0;
  if (norm <= 1.0) step = 1.0;
  else if (norm <= 2.0) step = 2.0;
  else if (norm <= 5.0) step = 5.0;
  return step * mag;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f6fb4", "#d0482d", "#2e8b57", "#8031a7",
                                 "#b8860b", "#3a3a3a", "#d06090", "#008b8b"};
  return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

}  // namespace detail

inline std::string render_chart(const std::vector<Series>& series, const std::string& title,
                                const std::string& x_label, const std::string& y_label,
                                int width = 800, int height = 500) {
  if (series.empty()) throw std::invalid_argument("render_chart: no series");
  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  bool any = false;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("render_chart: series x/y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        min_x = max_x = s.x[i];
        min_y = max_y = s.y[i];
        any = true;
      } else {
        min_x = std::min(min_x, s.x[i]);
        max_x = std::max(max_x, s.x[i]);
        min_y = std::min(min_y, s.y[i]);
        max_y = std::max(max_y, s.y[i]);
      }
    }
  }
  if (!any) throw std::invalid_argument("render_chart: no finite data points");
  if (max_x == min_x) {
    min_x -= 0.5;
    max_x += 0.5;
  }
  if (max_y == min_y) {
    min_y -= 0.5;
    max_y += 0.5;
  }

  const double ml = 70, mr = 20, mt = title.empty() ? 20 : 44, mb = 52;
  const double pw = width - ml - mr;
  const double ph = height - mt - mb;
  const auto sx = [&](double v) { return ml + (v - min_x) / (max_x - min_x) * pw; };
  const auto sy = [&](double v) { return mt + ph - (v - min_y) / (max_y - min_y) * ph; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << width / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\""
        << " text-anchor=\"middle\">" << detail::escape(title) << "</text>\n";

  // axes
  out << "<line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(mt + ph) << "\" x2=\""
      << detail::num(ml + pw) << "\" y2=\"" << detail::num(mt + ph)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(mt) << "\" x2=\""
      << detail::num(ml) << "\" y2=\"" << detail::num(mt + ph)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  // ticks and grid
  const double x_step = detail::nice_step(max_x - min_x, 6);
  for (double v = std::ceil(min_x / x_step) * x_step; v <= max_x + 1e-12 * x_step; v += x_step) {
    const double px = sx(v);
    out << "<line x1=\"" << detail::num(px) << "\" y1=\"" << detail::num(mt) << "\" x2=\""
        << detail::num(px) << "\" y2=\"" << detail::num(mt + ph)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << detail::num(px) << "\" y=\"" << detail::num(mt + ph + 18)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
        << detail::num(v) << "</text>\n";
  }
  const double y_step = detail::nice_step(max_y - min_y, 6);
  for (double v = std::ceil(min_y / y_step) * y_step; v <= max_y + 1e-12 * y_step; v += y_step) {
    const double py = sy(v);
    out << "<line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(py) << "\" x2=\""
        << detail::num(ml + pw) << "\" y2=\"" << detail::num(py)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << detail::num(ml - 6) << "\" y=\"" << detail::num(py + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << detail::num(v)
        << "</text>\n";
  }
  if (!x_label.empty())
    out << "<text x=\"" << detail::num(ml + pw / 2) << "\" y=\"" << detail::num(height - 10)
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
        << detail::escape(x_label) << "</text>\n";
  if (!y_label.empty())
    out << "<text x=\"16\" y=\"" << detail::num(mt + ph / 2)
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << detail::num(mt + ph / 2) << ")\">" << detail::escape(y_label) << "</text>\n";

  // data
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = detail::palette(si);
    if (!s.points_only && s.x.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << detail::num(sx(s.x[i])) << "," << detail::num(sy(s.y[i])) << " ";
      }
      out << "\"/>\n";
    }
    if (s.points_only) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << "<circle cx=\"" << detail::num(sx(s.x[i])) << "\" cy=\"" << detail::num(sy(s.y[i]))
            << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
  }

  // legend
  double ly = mt + 10;
  for (std::size_t si = 0; si < series.size(); ++si) {
    if (series[si].label.empty()) continue;
    out << "<rect x=\"" << detail::num(ml + pw - 150) << "\" y=\"" << detail::num(ly - 9)
        << "\" width=\"12\" height=\"12\" fill=\"" << detail::palette(si) << "\"/>\n";
    out << "<text x=\"" << detail::num(ml + pw - 132) << "\" y=\"" << detail::num(ly + 2)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::escape(series[si].label)
        << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ganlab::svg
