#include "cfsurv/flim.hpp"

#include <cmath>
#include <ostream>

#include <Eigen/Dense>

namespace cfsurv {

const Eigen::MatrixXd& FlimFit::beta_for(int t) const {
  for (int u = t; u >= 1; --u)
    if (estimable[static_cast<std::size_t>(u) - 1])
      return betas[static_cast<std::size_t>(u) - 1];
  throw FlimError("no estimable beta at or before t=" + std::to_string(t));
}

FlimFit fit_flim(const Panel& panel, const std::vector<std::string>& responses,
                 const std::vector<std::string>& adjustments,
                 const FlimOptions& options) {
  FlimFit fit;
  fit.responses = responses;
  fit.adjustments = adjustments;
  fit.has_constant = options.include_constant;
  fit.t_max = panel.t_max;

  std::vector<int> resp_idx, adj_idx;
  for (const auto& n : responses) resp_idx.push_back(panel.covariate_index(n));
  for (const auto& n : adjustments) adj_idx.push_back(panel.baseline_index(n));
  const int m = static_cast<int>(resp_idx.size());
  const int p = fit.design_dim();

  for (int t = 1; t <= panel.t_max; ++t) {
    std::vector<int> rows;
    for (int i = 0; i < panel.n_subjects(); ++i) {
      const auto& s = panel.subjects[static_cast<std::size_t>(i)];
      if (!s.at_risk(t)) continue;
      if (options.untreated_only && s.treated_at(t)) continue;
      bool usable = true;
      for (int j : resp_idx) {
        const bool have_prev = options.measured_only ? s.observed(t - 1, j) != 0
                                                     : !std::isnan(s.cov(t - 1, j));
        const bool have_cur = options.measured_only ? s.observed(t, j) != 0
                                                    : !std::isnan(s.cov(t, j));
        if (!have_prev || !have_cur) { usable = false; break; }
      }
      if (usable) rows.push_back(i);
    }

    const int n = static_cast<int>(rows.size());
    Eigen::MatrixXd U(n, p), dK(n, m);
    for (int r = 0; r < n; ++r) {
      const auto& s = panel.subjects[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])];
      int c = 0;
      if (options.include_constant) U(r, c++) = 1.0;
      for (int j : resp_idx) U(r, c++) = s.cov(t - 1, j);
      for (int b : adj_idx) U(r, c++) = s.baseline(b);
      for (int j = 0; j < m; ++j)
        dK(r, j) = s.cov(t, resp_idx[static_cast<std::size_t>(j)]) -
                   s.cov(t - 1, resp_idx[static_cast<std::size_t>(j)]);
    }

    fit.fitted_counts.push_back(n);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(p, m);
    bool ok = n >= p;
    if (ok) {
      Eigen::MatrixXd UtU = U.transpose() * U;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(UtU);
      lu.setThreshold(1e-10);
      if (lu.rank() < p) {
        ok = false;
      } else {
        beta = lu.inverse() * (U.transpose() * dK);
      }
    }
    fit.betas.push_back(std::move(beta));
    fit.estimable.push_back(ok);
  }
  return fit;
}

ImputedPanel impute_hypothetical(const FlimFit& fit, const Panel& panel) {
  std::vector<int> resp_idx;
  for (const auto& n : fit.responses) resp_idx.push_back(panel.covariate_index(n));
  std::vector<int> adj_idx;
  for (const auto& n : fit.adjustments) adj_idx.push_back(panel.baseline_index(n));
  const int m = static_cast<int>(resp_idx.size());

  ImputedPanel out;
  out.base = &panel;
  out.values.resize(static_cast<std::size_t>(panel.n_subjects()));
  out.provenance.resize(static_cast<std::size_t>(panel.n_subjects()));

  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    const int n = s.n_rows();
    Eigen::MatrixXd vals(n, m);
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> prov(n, m);

    Eigen::VectorXd state(m);
    for (int j = 0; j < m; ++j) {
      if (std::isnan(s.cov(0, resp_idx[static_cast<std::size_t>(j)])))
        throw FlimError("subject " + s.id + ": response missing at t=0");
      state(j) = s.cov(0, resp_idx[static_cast<std::size_t>(j)]);
      vals(0, j) = state(j);
      prov(0, j) = 1;
    }

    for (int t = 1; t < n; ++t) {
      const Eigen::MatrixXd& beta = fit.beta_for(t);
      Eigen::VectorXd design(fit.design_dim());
      int c = 0;
      if (fit.has_constant) design(c++) = 1.0;
      for (int j = 0; j < m; ++j) design(c++) = state(j);
      for (int b : adj_idx) design(c++) = s.baseline(b);
      Eigen::VectorXd model_next = state + beta.transpose() * design;
      for (int j = 0; j < m; ++j) {
        const int jj = resp_idx[static_cast<std::size_t>(j)];
        const bool seen = s.observed(t, jj) != 0 && !std::isnan(s.cov(t, jj));
        if (seen) {
          state(j) = s.cov(t, jj);
          prov(t, j) = 1;
        } else {
          state(j) = model_next(j);
          prov(t, j) = 0;
        }
        vals(t, j) = state(j);
      }
    }
    out.values[static_cast<std::size_t>(i)] = std::move(vals);
    out.provenance[static_cast<std::size_t>(i)] = std::move(prov);
  }
  return out;
}

void write_flim_fit(const FlimFit& fit, std::ostream& out) {
  out << "t,response,regressor,coefficient\n";
  out.precision(17);
  std::vector<std::string> regs;
  if (fit.has_constant) regs.push_back("(constant)");
  for (const auto& r : fit.responses) regs.push_back("lag(" + r + ")");
  for (const auto& a : fit.adjustments) regs.push_back(a);
  for (std::size_t ti = 0; ti < fit.betas.size(); ++ti) {
    if (!fit.estimable[ti]) continue;
    const auto& beta = fit.betas[ti];
    for (std::size_t j = 0; j < fit.responses.size(); ++j)
      for (std::size_t r = 0; r < regs.size(); ++r)
        out << (ti + 1) << ',' << fit.responses[j] << ',' << regs[r] << ','
            << beta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) << '\n';
  }
  (void)out;
}

}  // namespace cfsurv
