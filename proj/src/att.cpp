#include "cfsurv/att.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace cfsurv {

double CumulativeCurve::at(int t) const {
  if (values.empty() || t < 0) return 0.0;
  return values[static_cast<std::size_t>(std::min(t, t_max()))];
}

double CumulativeCurve::range() const {
  if (values.empty()) return 0.0;
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return *mx - *mn;
}

CumulativeCurve coefficient_curve(const AdditiveFit& fit, const std::string& name,
                                  int t_max, const std::string& label) {
  CumulativeCurve curve;
  curve.label = label;
  curve.values.resize(static_cast<std::size_t>(t_max) + 1);
  curve.variance.resize(static_cast<std::size_t>(t_max) + 1);
  for (int t = 0; t <= t_max; ++t) {
    auto [v, se] = fit.curve_at(name, t);
    curve.values[static_cast<std::size_t>(t)] = v;
    curve.variance[static_cast<std::size_t>(t)] = se * se;
  }
  return curve;
}

CumulativeCurve att_direct(const AdditiveFit& fit, const TreatedAverages& avgs) {
  const int t_max = static_cast<int>(avgs.risk_sizes.size()) - 1;
  auto med = mediation_decompose(fit, avgs);
  CumulativeCurve curve;
  curve.label = "att_direct";
  curve.values.resize(static_cast<std::size_t>(t_max) + 1);
  for (int t = 0; t <= t_max; ++t)
    curve.values[static_cast<std::size_t>(t)] =
        med.direct.at(t) + med.indirect.at(t);
  return curve;
}

CumulativeCurve att_shortcut(const Panel& manipulated, const Formula& formula) {
  auto fit = fit_additive(manipulated, formula);
  return coefficient_curve(fit, "treat", manipulated.t_max, "att_shortcut");
}

MediationCurves mediation_decompose(const AdditiveFit& fit,
                                    const TreatedAverages& avgs) {
  const int t_max = static_cast<int>(avgs.risk_sizes.size()) - 1;
  MediationCurves out;
  out.direct = coefficient_curve(fit, "treat", t_max, "att_direct_effect");
  out.indirect.label = "att_indirect_effect";
  out.indirect.values.assign(static_cast<std::size_t>(t_max) + 1, 0.0);

  std::vector<int> coef;
  for (const auto& name : avgs.responses) coef.push_back(fit.coef_index(name));

  double acc = 0.0;
  std::size_t inc = 0;
  for (int t = 0; t <= t_max; ++t) {
    // Increments with no treated subject at risk contribute nothing.
    while (inc < fit.times.size() && fit.times[inc] <= t) {
      const int u = fit.times[inc];
      if (u > t_max) break;
      if (avgs.risk_sizes[static_cast<std::size_t>(u)] > 0) {
        for (std::size_t j = 0; j < coef.size(); ++j)
          acc += (avgs.a_hat(u, static_cast<Eigen::Index>(j)) -
                  avgs.b_hat(u, static_cast<Eigen::Index>(j))) *
                 fit.increments(static_cast<Eigen::Index>(inc),
                                coef[j]);
      }
      ++inc;
    }
    out.indirect.values[static_cast<std::size_t>(t)] = acc;
  }
  return out;
}

namespace {

Panel resample_subjects(const Panel& panel, std::mt19937_64& rng) {
  Panel out;
  out.covariate_names = panel.covariate_names;
  out.baseline_names = panel.baseline_names;
  out.t_max = panel.t_max;
  std::uniform_int_distribution<int> pick(0, panel.n_subjects() - 1);
  for (int i = 0; i < panel.n_subjects(); ++i) {
    auto s = panel.subjects[static_cast<std::size_t>(pick(rng))];
    s.id += "#" + std::to_string(i);  // keep ids unique in the replicate
    out.subjects.push_back(std::move(s));
  }
  return out;
}

CumulativeCurve run_estimator(AttEstimator estimator, const Panel& panel,
                              const BootstrapOptions& options) {
  auto cf = impute_counterfactual(panel, options.cf_config);
  if (estimator == AttEstimator::shortcut)
    return att_shortcut(build_manipulated_panel(cf), options.formula);
  auto fit = fit_additive(panel, options.formula);
  return att_direct(fit, treated_averages(cf));
}

}  // namespace

BootstrapResult bootstrap_band(AttEstimator estimator, const Panel& panel,
                               const BootstrapOptions& options) {
  BootstrapResult result;
  result.curve = run_estimator(estimator, panel, options);
  const int B = options.replicates;
  const int t_max = panel.t_max;

  std::vector<std::vector<double>> reps;
  reps.reserve(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    // Independent substream per replicate index.
    std::seed_seq seq{options.seed, static_cast<std::uint64_t>(b)};
    std::mt19937_64 rng(seq);
    try {
      auto boot = resample_subjects(panel, rng);
      auto curve = run_estimator(estimator, boot, options);
      reps.push_back(curve.values);
    } catch (const std::exception&) {
      ++result.failures;
    }
  }
  if (reps.size() < static_cast<std::size_t>(std::ceil(0.9 * B)))
    throw std::runtime_error("bootstrap: more than 10% of replicates failed (" +
                             std::to_string(result.failures) + "/" +
                             std::to_string(B) + ")");

  const double alpha = 1.0 - options.level;
  result.curve.lower.resize(static_cast<std::size_t>(t_max) + 1);
  result.curve.upper.resize(static_cast<std::size_t>(t_max) + 1);
  std::vector<double> col(reps.size());
  for (int t = 0; t <= t_max; ++t) {
    for (std::size_t b = 0; b < reps.size(); ++b)
      col[b] = reps[b][static_cast<std::size_t>(t)];
    std::sort(col.begin(), col.end());
    auto quantile = [&](double q) {
      // Nearest-rank style with linear interpolation.
      double pos = q * (static_cast<double>(col.size()) - 1.0);
      std::size_t lo = static_cast<std::size_t>(std::floor(pos));
      std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
      double frac = pos - std::floor(pos);
      return col[lo] * (1.0 - frac) + col[hi] * frac;
    };
    result.curve.lower[static_cast<std::size_t>(t)] = quantile(alpha / 2.0);
    result.curve.upper[static_cast<std::size_t>(t)] = quantile(1.0 - alpha / 2.0);
  }
  return result;
}

void write_curve(const CumulativeCurve& curve, std::ostream& out) {
  out << "t,estimate,se,lower,upper\n";
  out.precision(17);
  for (int t = 0; t <= curve.t_max(); ++t) {
    const auto ti = static_cast<std::size_t>(t);
    out << t << ',' << curve.values[ti] << ',';
    if (!curve.variance.empty()) out << std::sqrt(std::max(0.0, curve.variance[ti]));
    out << ',';
    if (!curve.lower.empty()) out << curve.lower[ti];
    out << ',';
    if (!curve.upper.empty()) out << curve.upper[ti];
    out << '\n';
  }
}

}  // namespace cfsurv
