#include "cfsurv/aalen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

namespace cfsurv {

namespace {

std::vector<std::string> coef_names_for(const Panel& panel, const Formula& f) {
  std::vector<std::string> names;
  if (f.intercept) names.push_back("(intercept)");
  if (f.treatment) names.push_back("treat");
  for (const auto& b : f.baselines) names.push_back(b);
  for (const auto& c : f.covariates) names.push_back(c);
  (void)panel;
  return names;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

int AdditiveFit::coef_index(const std::string& name) const {
  auto it = std::find(coef_names.begin(), coef_names.end(), name);
  if (it == coef_names.end()) throw UnknownCoefficient(name);
  return static_cast<int>(it - coef_names.begin());
}

std::pair<double, double> AdditiveFit::curve_at(const std::string& name, int t) const {
  const int j = coef_index(name);
  // Last increment at or before t.
  int idx = -1;
  for (int i = 0; i < static_cast<int>(times.size()); ++i)
    if (times[static_cast<std::size_t>(i)] <= t) idx = i;
  if (idx < 0) return {0.0, 0.0};
  double var = robust_cov[static_cast<std::size_t>(idx)](j, j);
  return {cumulative(idx, j), std::sqrt(std::max(0.0, var))};
}

AdditiveFit fit_additive(const Panel& panel, const Formula& formula,
                         const RowWeights* weights) {
  AdditiveFit fit;
  fit.coef_names = coef_names_for(panel, formula);
  const int p = static_cast<int>(fit.coef_names.size());

  std::vector<int> base_idx, cov_idx;
  for (const auto& n : formula.baselines) base_idx.push_back(panel.baseline_index(n));
  for (const auto& n : formula.covariates) cov_idx.push_back(panel.covariate_index(n));

  Eigen::VectorXd cum = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd cov_acc = Eigen::MatrixXd::Zero(p, p);

  for (int t = 0; t <= panel.t_max; ++t) {
    std::vector<int> risk;
    int events_here = 0;
    for (int i = 0; i < panel.n_subjects(); ++i) {
      const auto& s = panel.subjects[static_cast<std::size_t>(i)];
      if (!s.at_risk(t)) continue;
      risk.push_back(i);
      if (s.event && s.exit_t() == t) ++events_here;
    }
    if (events_here == 0) continue;

    const int n = static_cast<int>(risk.size());
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd dN(n), w(n);
    for (int r = 0; r < n; ++r) {
      const auto& s = panel.subjects[static_cast<std::size_t>(risk[static_cast<std::size_t>(r)])];
      int c = 0;
      if (formula.intercept) X(r, c++) = 1.0;
      if (formula.treatment) X(r, c++) = s.treated_at(t) ? 1.0 : 0.0;
      for (int b : base_idx) X(r, c++) = s.baseline(b);
      for (int j : cov_idx) X(r, c++) = s.cov(t, j);
      dN(r) = (s.event && s.exit_t() == t) ? 1.0 : 0.0;
      double wr = 1.0;
      if (weights) {
        const auto& ws = (*weights)[static_cast<std::size_t>(risk[static_cast<std::size_t>(r)])];
        if (t < static_cast<int>(ws.size())) wr = ws[static_cast<std::size_t>(t)];
      }
      w(r) = wr;
    }

    // All-zero columns are dropped (their coefficient increment is 0);
    // remaining rank deficiency skips the interval.
    std::vector<int> active;
    for (int c = 0; c < p; ++c)
      if (X.col(c).cwiseAbs().maxCoeff() > 0.0) active.push_back(c);
    const int pa = static_cast<int>(active.size());
    Eigen::MatrixXd Xa(n, pa);
    for (int c = 0; c < pa; ++c) Xa.col(c) = X.col(active[static_cast<std::size_t>(c)]);

    Eigen::MatrixXd XtW = Xa.transpose() * w.asDiagonal();
    Eigen::MatrixXd XtWX = XtW * Xa;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(XtWX);
    lu.setThreshold(1e-10);
    if (n < pa || lu.rank() < pa) {
      fit.skipped_intervals.push_back(t);
      continue;
    }
    if (pa < p) fit.skipped_intervals.push_back(t);  // zero columns recorded
    Eigen::MatrixXd Aa = lu.inverse() * XtW;  // pa x n
    Eigen::VectorXd dba = Aa * dN;
    Eigen::VectorXd resid = dN - Xa * dba;
    // HC0-style sandwich piece: per-row squared residual contributions.
    Eigen::MatrixXd Va = Aa * resid.array().square().matrix().asDiagonal() * Aa.transpose();
    Eigen::VectorXd db = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(p, p);
    for (int c = 0; c < pa; ++c) {
      db(active[static_cast<std::size_t>(c)]) = dba(c);
      for (int d = 0; d < pa; ++d)
        V(active[static_cast<std::size_t>(c)], active[static_cast<std::size_t>(d)]) = Va(c, d);
    }

    cum += db;
    cov_acc += V;
    fit.times.push_back(t);
    fit.risk_sizes.push_back(n);
    fit.n_events += events_here;

    const Eigen::Index row = static_cast<Eigen::Index>(fit.times.size()) - 1;
    fit.increments.conservativeResize(row + 1, p);
    fit.cumulative.conservativeResize(row + 1, p);
    fit.increment_var.conservativeResize(row + 1, p);
    fit.increments.row(row) = db.transpose();
    fit.cumulative.row(row) = cum.transpose();
    fit.increment_var.row(row) = V.diagonal().transpose();
    fit.robust_cov.push_back(cov_acc);
  }
  return fit;
}

SlopeTestResult slope_test(const AdditiveFit& fit, const std::string& coefficient,
                           SlopeWeight weighting) {
  const int j = fit.coef_index(coefficient);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fit.times.size(); ++i) {
    double w = weighting == SlopeWeight::risk_size
                   ? static_cast<double>(fit.risk_sizes[i])
                   : 1.0;
    num += w * fit.increments(static_cast<Eigen::Index>(i), j);
    den += w * w * fit.increment_var(static_cast<Eigen::Index>(i), j);
  }
  SlopeTestResult res;
  res.coefficient = coefficient;
  if (den > 0.0) {
    res.statistic = num / std::sqrt(den);
    res.p_value = 2.0 * normal_sf(std::abs(res.statistic));
  } else {
    res.statistic = 0.0;
    res.p_value = 1.0;
  }
  return res;
}

void write_additive_fit(const AdditiveFit& fit, std::ostream& out) {
  out << "t,coefficient,increment,cumulative,robust_se\n";
  out.precision(17);
  for (std::size_t i = 0; i < fit.times.size(); ++i) {
    for (std::size_t j = 0; j < fit.coef_names.size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      double var = fit.robust_cov[i](jj, jj);
      out << fit.times[i] << ',' << fit.coef_names[j] << ','
          << fit.increments(ii, jj) << ',' << fit.cumulative(ii, jj) << ','
          << std::sqrt(std::max(0.0, var)) << '\n';
    }
  }
}

}  // namespace cfsurv
