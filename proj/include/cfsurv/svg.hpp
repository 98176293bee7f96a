#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cfsurv/att.hpp"

namespace cfsurv {

// Static step plot of one or more cumulative curves, with shaded bands
// where a curve carries them. Output is deterministic for fixed input.
struct SvgPlotOptions {
  int width = 720;
  int height = 480;
  std::string title;
  std::string x_label = "interval";
  std::string y_label = "cumulative coefficient";
};

void write_svg_plot(const std::vector<CumulativeCurve>& curves,
                    const SvgPlotOptions& options, std::ostream& out);

}  // namespace cfsurv
