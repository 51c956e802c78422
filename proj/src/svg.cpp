#include <cstdio>
#include <sstream>

#include "splinelab/analysis.hpp"

namespace splinelab {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

} // namespace

std::string svg_scatter(const std::vector<Eigen::Vector2d>& points,
                        const std::string& x_label, const std::string& y_label,
                        const SvgBounds& bounds,
                        const std::vector<std::pair<std::string, std::string>>& annotations) {
  if (points.empty()) throw InputError("svg_scatter: no points");
  const int W = 900, H = 700;
  const int ml = 70, mr = 20, mt = 50, mb = 55;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const double dx = bounds.xmax - bounds.xmin, dy = bounds.ymax - bounds.ymin;
  if (!(dx > 0.0) || !(dy > 0.0)) throw InputError("svg_scatter: degenerate bounds");

  auto px = [&](double x) { return ml + (x - bounds.xmin) / dx * pw; };
  auto py = [&](double y) { return mt + (bounds.ymax - y) / dy * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

  std::string title;
  for (const auto& [k, v] : annotations) {
    if (!title.empty()) title += "  ";
    title += k + "=" + v;
  }
  os << "<text x=\"" << ml << "\" y=\"28\" font-family=\"monospace\" font-size=\"15\">"
     << title << "</text>\n";

  // frame and axis labels with min/max ticks
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << num(pw) << "\" height=\""
     << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">" << x_label
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\" transform=\"rotate(-90 18 "
     << mt + ph / 2 << ")\">" << y_label << "</text>\n";
  os << "<text x=\"" << ml << "\" y=\"" << H - 34
     << "\" font-family=\"monospace\" font-size=\"12\">" << num(bounds.xmin) << "</text>\n";
  os << "<text x=\"" << ml + pw << "\" y=\"" << H - 34
     << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"12\">" << num(bounds.xmax)
     << "</text>\n";
  os << "<text x=\"" << ml - 6 << "\" y=\"" << mt + ph
     << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"12\">" << num(bounds.ymin)
     << "</text>\n";
  os << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 12
     << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"12\">" << num(bounds.ymax)
     << "</text>\n";

  // one marker per point; anything outside the bounds lands outside the
  // frame and the renderer clips it
  for (const auto& p : points) {
    os << "<circle cx=\"" << num(px(p[0])) << "\" cy=\"" << num(py(p[1]))
       << "\" r=\"1.2\" fill=\"black\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace splinelab
