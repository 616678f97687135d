#include "nspvi/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace nspvi {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (v != 0.0 && (a >= 1e4 || a < 1e-3)) {
    std::snprintf(buf, sizeof buf, "%.0e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%g", v);
  }
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0;  // in transformed units
  double hi = 1.0;

  double transform(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

Axis make_axis(const std::vector<Series>& series, bool log, bool use_x) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    const auto& vals = use_x ? s.x : s.y;
    for (double v : vals) {
      if (!a.usable(v)) continue;
      lo = std::min(lo, a.transform(v));
      hi = std::max(hi, a.transform(v));
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  if (log) {
    lo = std::floor(lo);
    hi = std::ceil(hi);
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

// Tick positions in data units.
std::vector<double> ticks(const Axis& a) {
  std::vector<double> out;
  if (a.log) {
    const int first = static_cast<int>(std::floor(a.lo));
    const int last = static_cast<int>(std::ceil(a.hi));
    const bool dense = last - first <= 2;
    for (int e = first; e <= last; ++e) {
      const double base = std::pow(10.0, e);
      for (double m : {1.0, 2.0, 5.0}) {
        if (m != 1.0 && !dense) continue;
        const double v = m * base;
        const double tv = std::log10(v);
        if (tv >= a.lo - 1e-9 && tv <= a.hi + 1e-9) out.push_back(v);
      }
    }
    return out;
  }
  const double span = a.hi - a.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-9 * step; v += step) {
    out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return out;
}

}  // namespace

std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& o) {
  const double left = 70.0, right = 150.0, top = 40.0, bottom = 55.0;
  const double pw = o.width - left - right;
  const double ph = o.height - top - bottom;
  const Axis ax = make_axis(series, o.log_x, true);
  const Axis ay = make_axis(series, o.log_y, false);
  auto px = [&](double v) { return left + (ax.transform(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return top + ph - (ay.transform(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\""
    << o.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(o.title) << "</text>\n";
  s << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw)
    << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double v : ticks(ax)) {
    const double x = px(v);
    s << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(x)
      << "\" y2=\"" << fmt(top + ph + 5) << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(x) << "\" y2=\""
      << fmt(top + ph) << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(top + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
  }
  for (double v : ticks(ay)) {
    const double y = py(v);
    s << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left)
      << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left + pw)
      << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">"
      << tick_label(v) << "</text>\n";
  }
  s << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(o.height - 12.0)
    << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n";
  s << "<text x=\"16\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << fmt(top + ph / 2) << ")\">" << escape(o.y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& sr = series[i];
    const char* color = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
    std::string points;
    for (std::size_t j = 0; j < sr.x.size() && j < sr.y.size(); ++j) {
      if (!ax.usable(sr.x[j]) || !ay.usable(sr.y[j])) continue;
      if (!points.empty()) points += ' ';
      points += fmt(px(sr.x[j])) + "," + fmt(py(sr.y[j]));
      s << "<circle cx=\"" << fmt(px(sr.x[j])) << "\" cy=\"" << fmt(py(sr.y[j]))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    if (!points.empty()) {
      s << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    }
    const double ly = top + 10.0 + 20.0 * static_cast<double>(i);
    s << "<line x1=\"" << fmt(left + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\""
      << fmt(left + pw + 36) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << fmt(left + pw + 42) << "\" y=\"" << fmt(ly + 4) << "\">"
      << escape(sr.name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace nspvi
