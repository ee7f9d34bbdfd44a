#pragma once

#include <string>
#include <vector>

namespace gflow {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

// Line chart with a log-scale y axis. Each series becomes one <polyline> with
// data-name and data-values (the raw y values) attributes.
std::string render_log_plot(const std::string& title, const std::vector<PlotSeries>& series);

// Extracts (name, values) pairs back out of an SVG produced above.
std::vector<PlotSeries> read_plot_series(const std::string& svg);

}  // namespace gflow
