#ifndef NSPVI_SVG_HPP
#define NSPVI_SVG_HPP

#include <string>
#include <vector>

namespace nspvi {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

// Static line chart with axes, ticks and a legend. Output depends only on the
// inputs (fixed number formatting), so it is reproducible byte for byte.
std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace nspvi

#endif  // NSPVI_SVG_HPP
