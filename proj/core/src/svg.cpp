#include "cpe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpe/errors.hpp"

namespace cpe {

namespace {

// Fixed canvas so output bytes are stable.
constexpr double kWidth = 900.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 70.0;
constexpr double kMarginTop = 48.0;
constexpr double kMarginBottom = 50.0;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct AxisRange {
  double lo = 0.0, hi = 1.0;
  double scale(double v, double px_lo, double px_hi) const {
    if (hi == lo) return 0.5 * (px_lo + px_hi);
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

AxisRange range_of(const std::vector<PlotSeries>& series) {
  AxisRange r{0.0, 1.0};
  bool first = true;
  for (const auto& s : series) {
    for (double v : s.values) {
      if (first) {
        r.lo = r.hi = v;
        first = false;
      } else {
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
      }
    }
  }
  if (first) return {0.0, 1.0};
  if (r.lo > 0.0) r.lo = 0.0;  // anchor at zero when everything is positive
  if (r.hi == r.lo) r.hi = r.lo + 1.0;
  const double pad = 0.05 * (r.hi - r.lo);
  r.hi += pad;
  if (r.lo < 0.0) r.lo -= pad;
  return r;
}

}  // namespace

std::string render_dual_axis_svg(const std::string& title,
                                 const std::string& x_label,
                                 const std::string& left_axis_label,
                                 const std::string& right_axis_label,
                                 const std::vector<PlotSeries>& lines,
                                 const std::vector<PlotSeries>& bars) {
  std::size_t n_points = 0;
  for (const auto& s : lines) n_points = std::max(n_points, s.values.size());
  for (const auto& s : bars) n_points = std::max(n_points, s.values.size());

  const double plot_left = kMarginLeft;
  const double plot_right = kWidth - kMarginRight;
  const double plot_top = kMarginTop;
  const double plot_bottom = kHeight - kMarginBottom;
  const AxisRange left = range_of(lines);
  const AxisRange right = range_of(bars);

  auto x_at = [&](std::size_t i) {
    if (n_points <= 1) return 0.5 * (plot_left + plot_right);
    return plot_left + (plot_right - plot_left) * static_cast<double>(i) /
                           static_cast<double>(n_points - 1);
  };
  auto y_left = [&](double v) { return left.scale(v, plot_bottom, plot_top); };
  auto y_right = [&](double v) { return right.scale(v, plot_bottom, plot_top); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth)
      << "\" height=\"" << num(kHeight) << "\" viewBox=\"0 0 " << num(kWidth) << " "
      << num(kHeight) << "\" font-family=\"monospace\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\""
      << num(kHeight) << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-size=\"15\">" << escape(title) << "</text>\n";

  // Bars first so lines draw on top.
  if (!bars.empty() && n_points > 0) {
    const double slot = (plot_right - plot_left) / static_cast<double>(n_points);
    const double bar_w = std::max(1.0, 0.7 * slot / static_cast<double>(bars.size()));
    for (std::size_t si = 0; si < bars.size(); ++si) {
      const auto& s = bars[si];
      svg << "<g fill=\"" << s.color << "\" fill-opacity=\"0.45\">\n";
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double cx = plot_left + slot * (static_cast<double>(i) + 0.5);
        const double x = cx - 0.5 * bar_w * static_cast<double>(bars.size()) +
                         bar_w * static_cast<double>(si);
        const double y0 = y_right(std::max(0.0, right.lo));
        const double y1 = y_right(s.values[i]);
        svg << "<rect x=\"" << num(x) << "\" y=\"" << num(std::min(y0, y1))
            << "\" width=\"" << num(bar_w) << "\" height=\""
            << num(std::abs(y0 - y1)) << "\"/>\n";
      }
      svg << "</g>\n";
    }
  }

  for (const auto& s : lines) {
    if (s.values.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) svg << " ";
      svg << num(x_at(i)) << "," << num(y_left(s.values[i]));
    }
    svg << "\"/>\n";
  }

  // Axes.
  svg << "<line x1=\"" << num(plot_left) << "\" y1=\"" << num(plot_top)
      << "\" x2=\"" << num(plot_left) << "\" y2=\"" << num(plot_bottom)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << num(plot_right) << "\" y1=\"" << num(plot_top)
      << "\" x2=\"" << num(plot_right) << "\" y2=\"" << num(plot_bottom)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << num(plot_left) << "\" y1=\"" << num(plot_bottom)
      << "\" x2=\"" << num(plot_right) << "\" y2=\"" << num(plot_bottom)
      << "\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int t = 0; t <= kTicks; ++t) {
    const double f = static_cast<double>(t) / kTicks;
    const double lv = left.lo + f * (left.hi - left.lo);
    const double rv = right.lo + f * (right.hi - right.lo);
    const double y = plot_bottom + f * (plot_top - plot_bottom);
    svg << "<text x=\"" << num(plot_left - 6) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\">" << num(lv) << "</text>\n";
    svg << "<text x=\"" << num(plot_right + 6) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"start\">" << num(rv) << "</text>\n";
  }
  svg << "<text x=\"" << num((plot_left + plot_right) / 2) << "\" y=\""
      << num(kHeight - 14) << "\" text-anchor=\"middle\">" << escape(x_label)
      << "</text>\n";
  svg << "<text x=\"16\" y=\"" << num(plot_top - 10) << "\">"
      << escape(left_axis_label) << " (left, lines)</text>\n";
  svg << "<text x=\"" << num(plot_right - 4) << "\" y=\"" << num(plot_top - 10)
      << "\" text-anchor=\"end\">" << escape(right_axis_label)
      << " (right, bars)</text>\n";

  double legend_y = plot_top + 8;
  for (const auto& s : lines) {
    svg << "<line x1=\"" << num(plot_left + 10) << "\" y1=\"" << num(legend_y)
        << "\" x2=\"" << num(plot_left + 34) << "\" y2=\"" << num(legend_y)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(plot_left + 40) << "\" y=\"" << num(legend_y + 4)
        << "\">" << escape(s.label) << "</text>\n";
    legend_y += 18;
  }
  for (const auto& s : bars) {
    svg << "<rect x=\"" << num(plot_left + 10) << "\" y=\"" << num(legend_y - 7)
        << "\" width=\"24\" height=\"10\" fill=\"" << s.color
        << "\" fill-opacity=\"0.45\"/>\n";
    svg << "<text x=\"" << num(plot_left + 40) << "\" y=\"" << num(legend_y + 4)
        << "\">" << escape(s.label) << "</text>\n";
    legend_y += 18;
  }

  svg << "</svg>\n";
  return svg.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write: " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cpe
