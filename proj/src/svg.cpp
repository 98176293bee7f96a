#include "cfsurv/svg.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace cfsurv {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf"};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

}  // namespace

void write_svg_plot(const std::vector<CumulativeCurve>& curves,
                    const SvgPlotOptions& opt, std::ostream& out) {
  double ymin = 0.0, ymax = 0.0;
  int t_max = 1;
  for (const auto& c : curves) {
    t_max = std::max(t_max, c.t_max());
    for (double v : c.values) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
    for (double v : c.lower) ymin = std::min(ymin, v);
    for (double v : c.upper) ymax = std::max(ymax, v);
  }
  if (ymax - ymin < 1e-12) { ymax = ymin + 1.0; }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double ml = 60, mr = 20, mt = 40, mb = 45;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto px = [&](double t) { return ml + pw * t / t_max; };
  auto py = [&](double v) { return mt + ph * (ymax - v) / (ymax - ymin); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    out << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-size=\"15\">" << opt.title << "</text>\n";

  // Axes with simple ticks.
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= t_max; ++t) {
    out << "<text x=\"" << fmt(px(t)) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\">" << t << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    double v = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(py(v) + 4)
        << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << fmt(py(v)) << "\" stroke=\"#dddddd\"/>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 8
      << "\" text-anchor=\"middle\">" << opt.x_label << "</text>\n";
  out << "<text x=\"14\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << mt + ph / 2
      << ")\">" << opt.y_label << "</text>\n";

  auto step_path = [&](const std::vector<double>& vals, bool reverse) {
    std::ostringstream path;
    const int n = static_cast<int>(vals.size());
    for (int idx = 0; idx < n; ++idx) {
      int t = reverse ? n - 1 - idx : idx;
      double x0 = px(t), y = py(vals[static_cast<std::size_t>(t)]);
      if (idx == 0) path << "M" << fmt(x0) << ' ' << fmt(y);
      else path << " V" << fmt(y);
      double x1 = px(std::min(t + 1, t_max));
      path << " H" << fmt(reverse ? x0 : x1);
    }
    return path.str();
  };

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& curve = curves[c];
    const char* color = kPalette[c % (sizeof(kPalette) / sizeof(*kPalette))];
    if (!curve.lower.empty() && !curve.upper.empty()) {
      out << "<path d=\"" << step_path(curve.upper, false) << ' '
          << "L" << fmt(px(curve.t_max())) << ' '
          << fmt(py(curve.lower.back())) << ' ' << step_path(curve.lower, true)
          << " Z\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    out << "<path d=\"" << step_path(curve.values, false) << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 16 + 16 * static_cast<int>(c)
        << "\" fill=\"" << color << "\">" << curve.label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace cfsurv
