#include "cfsurv/counterfactual.hpp"

#include <cmath>
#include <ostream>

namespace cfsurv {

bool CfPanel::has_l0(int subject, int t) const {
  const auto& s = base->subjects[static_cast<std::size_t>(subject)];
  if (!s.treat_start || l0[static_cast<std::size_t>(subject)].size() == 0)
    return false;
  return t >= *s.treat_start && t <= s.exit_t();
}

double CfPanel::l0_at(int subject, int t, int response) const {
  const auto& s = base->subjects[static_cast<std::size_t>(subject)];
  return l0[static_cast<std::size_t>(subject)](t - *s.treat_start, response);
}

CfPanel impute_counterfactual(const Panel& panel, const CfConfig& config) {
  CfPanel cf;
  cf.base = &panel;
  cf.responses =
      config.responses.empty() ? panel.covariate_names : config.responses;

  FlimOptions opts;
  opts.untreated_only = true;
  opts.measured_only = config.measured_only;
  cf.dynamics = fit_flim(panel, cf.responses, config.adjustments, opts);

  std::vector<int> resp_idx;
  for (const auto& n : cf.responses) resp_idx.push_back(panel.covariate_index(n));
  std::vector<int> adj_idx;
  for (const auto& n : config.adjustments)
    adj_idx.push_back(panel.baseline_index(n));
  const int m = static_cast<int>(resp_idx.size());

  cf.l0.resize(static_cast<std::size_t>(panel.n_subjects()));
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    if (!s.treat_start) continue;
    const int S = *s.treat_start;
    const int exit = s.exit_t();

    // Seed from the last pre-treatment state; a subject treated from t=0
    // seeds from its baseline measurement.
    Eigen::VectorXd state(m);
    const int seed_t = S > 0 ? S - 1 : 0;
    for (int j = 0; j < m; ++j) {
      double v = s.cov(seed_t, resp_idx[static_cast<std::size_t>(j)]);
      if (std::isnan(v))
        throw CounterfactualError("subject " + s.id +
                                  ": missing pre-treatment covariate value");
      state(j) = v;
    }

    Eigen::MatrixXd traj(exit - S + 1, m);
    for (int t = S; t <= exit; ++t) {
      if (S == 0 && t == 0) {
        traj.row(0) = state.transpose();
        continue;
      }
      const Eigen::MatrixXd& beta = cf.dynamics.beta_for(t);
      Eigen::VectorXd design(cf.dynamics.design_dim());
      int c = 0;
      if (cf.dynamics.has_constant) design(c++) = 1.0;
      for (int j = 0; j < m; ++j) design(c++) = state(j);
      for (int b : adj_idx) design(c++) = s.baseline(b);
      state += beta.transpose() * design;
      traj.row(t - S) = state.transpose();
    }
    cf.l0[static_cast<std::size_t>(i)] = std::move(traj);
  }
  return cf;
}

TreatedAverages treated_averages(const CfPanel& cf) {
  const Panel& panel = *cf.base;
  const int m = static_cast<int>(cf.responses.size());
  std::vector<int> resp_idx;
  for (const auto& n : cf.responses) resp_idx.push_back(panel.covariate_index(n));

  TreatedAverages avg;
  avg.responses = cf.responses;
  avg.risk_sizes.assign(static_cast<std::size_t>(panel.t_max) + 1, 0);
  avg.a_hat = Eigen::MatrixXd::Zero(panel.t_max + 1, m);
  avg.b_hat = Eigen::MatrixXd::Zero(panel.t_max + 1, m);

  for (int t = 0; t <= panel.t_max; ++t) {
    auto risk = risk_set(panel, t, RiskMode::treated_att);
    avg.risk_sizes[static_cast<std::size_t>(t)] = static_cast<int>(risk.size());
    if (risk.empty()) continue;
    for (int i : risk) {
      const auto& s = panel.subjects[static_cast<std::size_t>(i)];
      for (int j = 0; j < m; ++j) {
        avg.a_hat(t, j) += s.cov(t, resp_idx[static_cast<std::size_t>(j)]);
        avg.b_hat(t, j) += cf.l0_at(i, t, j);
      }
    }
    avg.a_hat.row(t) /= static_cast<double>(risk.size());
    avg.b_hat.row(t) /= static_cast<double>(risk.size());
  }
  return avg;
}

Panel build_manipulated_panel(const CfPanel& cf) {
  Panel out = *cf.base;
  std::vector<int> resp_idx;
  for (const auto& n : cf.responses)
    resp_idx.push_back(out.covariate_index(n));
  for (int i = 0; i < out.n_subjects(); ++i) {
    auto& s = out.subjects[static_cast<std::size_t>(i)];
    if (!s.treat_start) continue;
    for (int t = *s.treat_start; t <= s.exit_t(); ++t)
      for (std::size_t j = 0; j < resp_idx.size(); ++j)
        s.cov(t, resp_idx[j]) = cf.l0_at(i, t, static_cast<int>(j));
  }
  return out;
}

void write_cf_panel(const CfPanel& cf, std::ostream& out) {
  const Panel& panel = *cf.base;
  out << "id,t,treat,variable,value,provenance\n";
  out.precision(17);
  std::vector<int> resp_idx;
  for (const auto& n : cf.responses) resp_idx.push_back(panel.covariate_index(n));
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    for (int t = 0; t <= s.exit_t(); ++t) {
      for (std::size_t j = 0; j < cf.responses.size(); ++j) {
        out << s.id << ',' << t << ',' << int(s.treat[static_cast<std::size_t>(t)]) << ','
            << cf.responses[j] << ',' << s.cov(t, resp_idx[j]) << ",observed\n";
        if (cf.has_l0(i, t))
          out << s.id << ',' << t << ',' << int(s.treat[static_cast<std::size_t>(t)]) << ','
              << cf.responses[j] << ',' << cf.l0_at(i, t, static_cast<int>(j))
              << ",counterfactual\n";
      }
    }
  }
}

}  // namespace cfsurv
