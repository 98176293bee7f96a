#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cfsurv/study.hpp"
#include "cfsurv/svg.hpp"

using namespace cfsurv;

namespace {

StudyConfig small_config() {
  StudyConfig cfg;
  cfg.regimes = {Regime::one, Regime::two};
  cfg.replicates = 4;
  cfg.n = 120;
  cfg.master_seed = 77;
  cfg.parallel = false;
  return cfg;
}

double max_abs_difference(const StudyResult& a, const StudyResult& b) {
  double worst = 0;
  REQUIRE(a.regimes.size() == b.regimes.size());
  for (std::size_t i = 0; i < a.regimes.size(); ++i) {
    for (const auto& [key, hr] : a.regimes[i].mean_hazard_ratios)
      worst = std::max(worst, std::abs(hr - b.regimes[i].mean_hazard_ratios.at(key)));
    for (const auto& [key, curve] : a.regimes[i].mean_curves) {
      const auto& other = b.regimes[i].mean_curves.at(key);
      for (std::size_t t = 0; t < curve.values.size(); ++t)
        worst = std::max(worst, std::abs(curve.values[t] - other.values[t]));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("a single replicate produces every analysis") {
  auto cfg = RegimeConfig::defaults(Regime::one, 200, 5);
  auto rep = analyze_replicate(cfg, 6);
  REQUIRE_FALSE(rep.failed);
  for (Analysis a : kAllAnalyses) {
    CHECK(rep.curves.count(a) == 1);
    if (a != Analysis::att_direct) CHECK(rep.hazard_ratios.count(a) == 1);
  }
  for (const auto& [a, hr] : rep.hazard_ratios) {
    CHECK(hr > 0.2);
    CHECK(hr < 2.0);
  }
}

TEST_CASE("serial study runs are reproducible") {
  auto cfg = small_config();
  auto a = replicate_study(cfg);
  auto b = replicate_study(cfg);
  CHECK(max_abs_difference(a, b) == 0.0);
  for (const auto& summary : a.regimes) CHECK(summary.replicates_used >= 1);
}

TEST_CASE("parallel and serial execution agree bit for bit") {
  auto cfg = small_config();
  auto serial = replicate_study(cfg);
  cfg.parallel = true;
  auto parallel = replicate_study(cfg);
  CHECK(max_abs_difference(serial, parallel) == 0.0);
}

TEST_CASE("different replicate seeds give different cohorts") {
  auto cfg = RegimeConfig::defaults(Regime::one, 150, mix_seed(3, 1, 0));
  auto cfg2 = RegimeConfig::defaults(Regime::one, 150, mix_seed(3, 1, 1));
  auto a = analyze_replicate(cfg, 1);
  auto b = analyze_replicate(cfg2, 2);
  REQUIRE_FALSE(a.failed);
  REQUIRE_FALSE(b.failed);
  CHECK(a.hazard_ratios.at(Analysis::simulated) !=
        b.hazard_ratios.at(Analysis::simulated));
}

TEST_CASE("summary lookup by regime matches order of configuration") {
  auto cfg = small_config();
  auto res = replicate_study(cfg);
  CHECK(res.summary(Regime::one).regime == Regime::one);
  CHECK(res.summary(Regime::two).regime == Regime::two);
  CHECK_THROWS(res.summary(Regime::three));
}

TEST_CASE("result tables and plots are written and well formed") {
  auto cfg = small_config();
  auto res = replicate_study(cfg);

  std::ostringstream table;
  res.write_cox_table(table);
  std::istringstream in(table.str());
  std::string header;
  std::getline(in, header);
  CHECK(header.find("analysis") != std::string::npos);
  int lines = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++lines;
  CHECK(lines == 6);  // six hazard-ratio rows

  std::ostringstream curves;
  res.write_mean_curves(curves);
  std::istringstream curves_in(curves.str());
  std::getline(curves_in, header);
  CHECK(header.find("regime") != std::string::npos);

  // Plot writing is deterministic.
  std::vector<CumulativeCurve> series = {
      res.summary(Regime::one).mean_curves.at(Analysis::simulated)};
  SvgPlotOptions opts;
  opts.title = "demo";
  std::ostringstream p1, p2;
  write_svg_plot(series, opts, p1);
  write_svg_plot(series, opts, p2);
  CHECK(p1.str() == p2.str());
  CHECK(p1.str().find("<svg") != std::string::npos);
}

TEST_CASE("analysis names are stable identifiers") {
  CHECK(analysis_name(Analysis::simulated) == std::string("att_simulated"));
  CHECK(analysis_name(Analysis::att_shortcut) == std::string("att_shortcut"));
  CHECK(analysis_name(Analysis::msm) == std::string("msm"));
  CHECK(analysis_name(Analysis::naive_treat) == std::string("naive_treat"));
}
