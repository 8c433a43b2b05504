#pragma once

#include <string>
#include <vector>

namespace cpe {

// One plotted series. Lines draw on the left axis, bars on the right axis.
struct PlotSeries {
  std::string label;
  std::vector<double> values;
  std::string color;
};

// Dual-axis chart (lines left, bars right) rendered as a standalone SVG
// string. No plotting dependency; fixed canvas and fixed-precision number
// formatting keep the bytes stable across runs.
std::string render_dual_axis_svg(const std::string& title,
                                 const std::string& x_label,
                                 const std::string& left_axis_label,
                                 const std::string& right_axis_label,
                                 const std::vector<PlotSeries>& lines,
                                 const std::vector<PlotSeries>& bars);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);  // throws NotFoundError

}  // namespace cpe
