#pragma once

// Minimal hand-emitted SVG scatter/line charts: axes, ticks, per-series
// polyline + markers, legend. No plotting dependency; output is a pure
// deterministic function of the data, so plots never perturb CSV content.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fedgain/types.hpp"

namespace fedgain {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

namespace svgdetail {

inline std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v,
                           std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

// Tick label: enough digits to distinguish neighboring ticks.
inline std::string tick_label(double v) {
  if (v != 0.0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-3)) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v,
                             std::chars_format::scientific, 2);
    return std::string(buf, res.ptr);
  }
  char buf[40];
  auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
  std::string s(buf, res.ptr);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

inline Range data_range(const std::vector<SvgSeries>& series, bool x_axis) {
  Range r{1e300, -1e300};
  for (const auto& s : series)
    for (const auto& p : s.points) {
      const double v = x_axis ? p.first : p.second;
      r.lo = std::min(r.lo, v);
      r.hi = std::max(r.hi, v);
    }
  if (r.lo > r.hi) return {0.0, 1.0};
  if (r.lo == r.hi) {
    r.lo -= 1.0;
    r.hi += 1.0;
  }
  const double pad = 0.05 * (r.hi - r.lo);
  return {r.lo - pad, r.hi + pad};
}

inline std::vector<double> ticks(const Range& r, int count = 5) {
  std::vector<double> out;
  const double raw = (r.hi - r.lo) / count;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0})
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  const double first = std::ceil(r.lo / step) * step;
  for (double t = first; t <= r.hi + 1e-12 * step; t += step)
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

}  // namespace svgdetail

inline std::string render_chart_svg(const std::string& title,
                                    const std::string& x_label,
                                    const std::string& y_label,
                                    const std::vector<SvgSeries>& series,
                                    bool connect_points = true) {
  using svgdetail::num;
  const int width = 680, height = 460;
  const int ml = 70, mr = 20, mt = 40, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;
  const auto xr = svgdetail::data_range(series, true);
  const auto yr = svgdetail::data_range(series, false);
  const auto sx = [&](double v) {
    return ml + pw * (v - xr.lo) / (xr.hi - xr.lo);
  };
  const auto sy = [&](double v) {
    return mt + ph * (1.0 - (v - yr.lo) / (yr.hi - yr.lo));
  };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">" +
         title + "</text>\n";

  // axes
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" +
         num(ml + pw) + "\" y2=\"" + num(mt + ph) +
         "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" +
         num(ml) + "\" y2=\"" + num(mt + ph) + "\" stroke=\"black\"/>\n";
  for (double t : svgdetail::ticks(xr)) {
    out += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(mt + ph) +
           "\" x2=\"" + num(sx(t)) + "\" y2=\"" + num(mt + ph + 5) +
           "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(mt + ph + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           svgdetail::tick_label(t) + "</text>\n";
  }
  for (double t : svgdetail::ticks(yr)) {
    out += "<line x1=\"" + num(ml - 5) + "\" y1=\"" + num(sy(t)) +
           "\" x2=\"" + num(ml) + "\" y2=\"" + num(sy(t)) +
           "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(sy(t) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           svgdetail::tick_label(t) + "</text>\n";
  }
  out += "<text x=\"" + std::to_string(ml + int(pw) / 2) + "\" y=\"" +
         std::to_string(height - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" +
         x_label + "</text>\n";
  out += "<text x=\"18\" y=\"" + std::to_string(mt + int(ph) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 " +
         std::to_string(mt + int(ph) / 2) + ")\">" + y_label + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % 6];
    auto pts = series[si].points;
    std::sort(pts.begin(), pts.end());
    if (connect_points && pts.size() > 1) {
      std::string poly = "<polyline fill=\"none\" stroke=\"";
      poly += color;
      poly += "\" stroke-width=\"1.5\" points=\"";
      for (const auto& p : pts)
        poly += num(sx(p.first)) + "," + num(sy(p.second)) + " ";
      poly += "\"/>\n";
      out += poly;
    }
    for (const auto& p : pts)
      out += "<circle cx=\"" + num(sx(p.first)) + "\" cy=\"" +
             num(sy(p.second)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    // legend swatch + label
    const double ly = mt + 8 + 16.0 * static_cast<double>(si);
    out += "<rect x=\"" + num(ml + pw - 150) + "\" y=\"" + num(ly - 8) +
           "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    out += "<text x=\"" + num(ml + pw - 135) + "\" y=\"" + num(ly + 1) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" +
           series[si].label + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace fedgain
