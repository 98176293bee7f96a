#include "cfsurv/weights.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

namespace cfsurv {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct DesignInfo {
  std::vector<std::string> names;
  std::vector<int> base_idx;
  std::vector<int> cov_idx;
  int n_time_blocks = 0;
  TimeBasis basis;
};

DesignInfo design_info(const Panel& panel, const PooledLogisticSpec& spec) {
  DesignInfo d;
  d.basis = spec.time_basis;
  d.n_time_blocks = spec.time_basis.n_blocks(panel.t_max);
  d.names.push_back("(intercept)");
  for (int b = 1; b < d.n_time_blocks; ++b)
    d.names.push_back("time_block_" + std::to_string(b));
  for (const auto& n : spec.baselines) {
    d.base_idx.push_back(panel.baseline_index(n));
    d.names.push_back(n);
  }
  for (const auto& n : spec.covariates) {
    d.cov_idx.push_back(panel.covariate_index(n));
    d.names.push_back(n);
  }
  return d;
}

void fill_row(const DesignInfo& d, const SubjectRecord& s, int t,
              Eigen::Ref<Eigen::RowVectorXd> row) {
  int c = 0;
  row(c++) = 1.0;
  const int block = t / d.basis.block_length;
  for (int b = 1; b < d.n_time_blocks; ++b) row(c++) = block == b ? 1.0 : 0.0;
  for (int j : d.base_idx) row(c++) = s.baseline(j);
  for (int j : d.cov_idx) row(c++) = s.cov(t, j);
}

// Person-interval rows entering the model, with their outcome indicator.
std::vector<std::pair<std::pair<int, int>, double>> model_rows(
    const Panel& panel, PooledOutcome outcome) {
  std::vector<std::pair<std::pair<int, int>, double>> rows;
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    for (int t = 0; t <= s.exit_t(); ++t) {
      if (outcome == PooledOutcome::treatment_start) {
        // Only person-time still eligible to start treatment.
        if (s.treat_start && t > *s.treat_start) continue;
        double y = (s.treat_start && t == *s.treat_start) ? 1.0 : 0.0;
        rows.push_back({{i, t}, y});
      } else {
        double y = (s.censored && t == s.exit_t()) ? 1.0 : 0.0;
        rows.push_back({{i, t}, y});
      }
    }
  }
  return rows;
}

}  // namespace

double PooledLogisticFit::probability(const Panel& panel, int subject, int t) const {
  DesignInfo d = design_info(panel, spec);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(d.names.size()));
  fill_row(d, panel.subjects[static_cast<std::size_t>(subject)], t, row);
  // Dropped columns carry zero coefficients, so the full inner product works.
  return expit(row * coef);
}

PooledLogisticFit fit_pooled_logistic(const Panel& panel,
                                      const PooledLogisticSpec& spec) {
  DesignInfo d = design_info(panel, spec);
  auto rows = model_rows(panel, spec.outcome);
  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(d.names.size());
  if (n == 0) throw WeightError("pooled logistic: no model rows");

  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    const auto& [it, out] = rows[static_cast<std::size_t>(r)];
    Eigen::RowVectorXd xr(p);
    fill_row(d, panel.subjects[static_cast<std::size_t>(it.first)], it.second, xr);
    X.row(r) = xr;
    y(r) = out;
  }

  PooledLogisticFit fit;
  fit.spec = spec;
  fit.term_names = d.names;
  fit.t_max = panel.t_max;

  // Drop zero-variance columns (beyond the intercept) with a warning entry.
  std::vector<int> active = {0};
  for (int c = 1; c < p; ++c) {
    double mn = X.col(c).minCoeff(), mx = X.col(c).maxCoeff();
    if (mx - mn < 1e-12) {
      fit.dropped_terms.push_back(d.names[static_cast<std::size_t>(c)]);
    } else {
      active.push_back(c);
    }
  }
  const int pa = static_cast<int>(active.size());
  Eigen::MatrixXd Xa(n, pa);
  for (int c = 0; c < pa; ++c) Xa.col(c) = X.col(active[static_cast<std::size_t>(c)]);

  auto loglik = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = Xa * b;
    double ll = 0.0;
    for (int r = 0; r < n; ++r)
      ll += y(r) * eta(r) - std::log1p(std::exp(eta(r)));
    return ll;
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(pa);
  double ll = loglik(b);
  const int max_iter = 100;
  int iter = 0;
  double gnorm = 0.0;
  for (; iter < max_iter; ++iter) {
    Eigen::VectorXd pr = (Xa * b).unaryExpr([](double e) { return expit(e); });
    Eigen::VectorXd grad = Xa.transpose() * (y - pr);
    gnorm = grad.cwiseAbs().maxCoeff();
    if (gnorm < 1e-8) break;
    Eigen::VectorXd wdiag = pr.array() * (1.0 - pr.array());
    Eigen::MatrixXd H = Xa.transpose() * wdiag.asDiagonal() * Xa;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success)
      throw WeightError("pooled logistic: information matrix not positive definite");
    Eigen::VectorXd step = ldlt.solve(grad);
    // Step halving keeps the likelihood non-decreasing.
    double scale = 1.0;
    Eigen::VectorXd bn = b + step;
    double lln = loglik(bn);
    // Tolerate rounding noise in the likelihood near the optimum, where
    // the true improvement per step drops below evaluation precision.
    const double slack = 1e-9 * (std::abs(ll) + 1.0);
    int halvings = 0;
    while ((!std::isfinite(lln) || lln < ll - slack) && halvings < 30) {
      scale *= 0.5;
      bn = b + scale * step;
      lln = loglik(bn);
      ++halvings;
    }
    b = bn;
    ll = lln;
  }
  fit.iterations = iter;
  fit.gradient_norm = gnorm;
  if (iter >= max_iter)
    throw WeightError("pooled logistic: no convergence after 100 iterations "
                      "(gradient max-norm " + std::to_string(gnorm) + ")");

  Eigen::VectorXd pr = (Xa * b).unaryExpr([](double e) { return expit(e); });
  fit.perfect_prediction =
      (pr.array() * (1.0 - pr.array())).minCoeff() < 1e-12 ||
      b.cwiseAbs().maxCoeff() > 30.0;

  fit.coef = Eigen::VectorXd::Zero(p);
  for (int c = 0; c < pa; ++c) fit.coef(active[static_cast<std::size_t>(c)]) = b(c);
  return fit;
}

double WeightSet::mean_combined(const Panel& panel) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < combined.size(); ++i)
    for (double w : combined[i]) {
      sum += w;
      ++count;
    }
  (void)panel;
  return count ? sum / static_cast<double>(count) : 0.0;
}

double WeightSet::max_combined() const {
  double mx = 0.0;
  for (const auto& ws : combined)
    for (double w : ws) mx = std::max(mx, w);
  return mx;
}

WeightSet stabilized_weights(const Panel& panel, const PooledLogisticFit& num_fit,
                             const PooledLogisticFit& den_fit,
                             const PooledLogisticFit* cens_num,
                             const PooledLogisticFit* cens_den,
                             const TruncationSpec& truncation) {
  WeightSet ws;
  const int n = panel.n_subjects();
  ws.treatment.resize(static_cast<std::size_t>(n));
  ws.censoring.resize(static_cast<std::size_t>(n));
  ws.combined.resize(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    const int rows = s.n_rows();
    auto& wt = ws.treatment[static_cast<std::size_t>(i)];
    auto& wc = ws.censoring[static_cast<std::size_t>(i)];
    auto& wb = ws.combined[static_cast<std::size_t>(i)];
    wt.resize(static_cast<std::size_t>(rows));
    wc.resize(static_cast<std::size_t>(rows));
    wb.resize(static_cast<std::size_t>(rows));

    double treat_prod = 1.0;
    double cens_prod = 1.0;
    for (int t = 0; t < rows; ++t) {
      // Treatment factors accumulate while the subject can still start;
      // after the start interval the weight is frozen.
      const bool pre_start = !s.treat_start || t <= *s.treat_start;
      if (pre_start) {
        double pn = num_fit.probability(panel, i, t);
        double pd = den_fit.probability(panel, i, t);
        const bool starts = s.treat_start && t == *s.treat_start;
        double fn = starts ? pn : 1.0 - pn;
        double fd = starts ? pd : 1.0 - pd;
        if (fd <= 0.0)
          throw WeightError("stabilized_weights: zero denominator probability");
        treat_prod *= fn / fd;
      }
      wt[static_cast<std::size_t>(t)] = treat_prod;

      // Censoring factor for interval t: probability of having remained
      // uncensored through t-1.
      if (cens_num && cens_den && t > 0) {
        double pn = cens_num->probability(panel, i, t - 1);
        double pd = cens_den->probability(panel, i, t - 1);
        if (1.0 - pd <= 0.0)
          throw WeightError("stabilized_weights: certain censoring in denominator");
        cens_prod *= (1.0 - pn) / (1.0 - pd);
      }
      wc[static_cast<std::size_t>(t)] = cens_prod;
      wb[static_cast<std::size_t>(t)] =
          wt[static_cast<std::size_t>(t)] * wc[static_cast<std::size_t>(t)];
    }
  }

  // Percentile truncation on the pooled combined weights.
  std::vector<double> all;
  for (const auto& v : ws.combined) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  auto pct = [&](double q) {
    double pos = q * (static_cast<double>(all.size()) - 1.0);
    return all[static_cast<std::size_t>(std::llround(pos))];
  };
  ws.lower_bound = pct(truncation.lower_pct);
  ws.upper_bound = pct(truncation.upper_pct);
  for (auto& v : ws.combined)
    for (double& w : v) {
      if (w < ws.lower_bound) { w = ws.lower_bound; ++ws.truncated_count; }
      else if (w > ws.upper_bound) { w = ws.upper_bound; ++ws.truncated_count; }
    }
  return ws;
}

AdditiveFit msm_additive(const Panel& panel, const WeightSet& weights,
                         const Formula& formula) {
  return fit_additive(panel, formula, &weights.combined);
}

void write_weights(const Panel& panel, const WeightSet& weights, std::ostream& out) {
  out << "id,t,w_treat,w_cens,w_comb\n";
  out.precision(17);
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    for (int t = 0; t <= s.exit_t(); ++t) {
      const auto ti = static_cast<std::size_t>(t);
      const auto ii = static_cast<std::size_t>(i);
      out << s.id << ',' << t << ',' << weights.treatment[ii][ti] << ','
          << weights.censoring[ii][ti] << ',' << weights.combined[ii][ti] << '\n';
    }
  }
}

}  // namespace cfsurv
