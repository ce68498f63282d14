#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "inis/additive_selector.hpp"

namespace inis {

// Fitted component curve over its basis support as a standalone SVG file.
inline void write_component_svg(std::ostream& out, const AdditiveComponent& component,
                                std::size_t points = 200) {
  points = std::max<std::size_t>(points, 2);
  const double lo = component.basis.lower();
  const double hi = component.basis.upper();
  std::vector<double> xs(points), ys(points);
  for (std::size_t i = 0; i < points; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    ys[i] = component.evaluate(xs[i]);
  }
  double ymin = *std::min_element(ys.begin(), ys.end());
  double ymax = *std::max_element(ys.begin(), ys.end());
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  constexpr double width = 480.0, height = 320.0, margin = 48.0;
  const double xspan = hi > lo ? hi - lo : 1.0;
  auto px = [&](double x) { return margin + (x - lo) / xspan * (width - 2 * margin); };
  auto py = [&](double y) { return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin); };
  char buf[128];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin
      << "\" height=\"" << height - 2 * margin << "\" fill=\"none\" stroke=\"#888\"/>\n";
  if (ymin < 0.0 && ymax > 0.0) {
    std::snprintf(buf, sizeof(buf), "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#ccc\"/>\n",
                  margin, py(0.0), width - margin, py(0.0));
    out << buf;
  }
  out << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < points; ++i) {
    std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", i ? " " : "", px(xs[i]), py(ys[i]));
    out << buf;
  }
  out << "\"/>\n";
  auto label = [&](double x, double y, const char* anchor, const std::string& text) {
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"%s\">", x, y,
                  anchor);
    out << buf << text << "</text>\n";
  };
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
  };
  label(width / 2, margin - 16, "middle", "f(" + component.name + ")");
  label(margin, height - margin + 16, "start", num(lo));
  label(width - margin, height - margin + 16, "end", num(hi));
  label(margin - 4, height - margin, "end", num(ymin));
  label(margin - 4, margin + 10, "end", num(ymax));
  out << "</svg>\n";
}

}  // namespace inis
