#include "cfsurv/cox.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace cfsurv {

namespace {

struct CoxDesign {
  bool treatment = false;
  std::vector<int> base_idx;
  std::vector<int> cov_idx;
  std::vector<std::string> names;
  int p() const { return static_cast<int>(names.size()); }

  void fill(const SubjectRecord& s, int t, Eigen::Ref<Eigen::RowVectorXd> row) const {
    int c = 0;
    if (treatment) row(c++) = s.treated_at(t) ? 1.0 : 0.0;
    for (int b : base_idx) row(c++) = s.baseline(b);
    for (int j : cov_idx) row(c++) = s.cov(t, j);
  }
};

CoxDesign make_design(const Panel& panel, const Formula& formula) {
  CoxDesign d;
  d.treatment = formula.treatment;
  if (formula.treatment) d.names.push_back("treat");
  for (const auto& n : formula.baselines) {
    d.base_idx.push_back(panel.baseline_index(n));
    d.names.push_back(n);
  }
  for (const auto& n : formula.covariates) {
    d.cov_idx.push_back(panel.covariate_index(n));
    d.names.push_back(n);
  }
  return d;
}

double row_weight(const RowWeights* weights, int subject, int t) {
  if (!weights) return 1.0;
  const auto& ws = (*weights)[static_cast<std::size_t>(subject)];
  return t < static_cast<int>(ws.size()) ? ws[static_cast<std::size_t>(t)] : 1.0;
}

// Breslow log partial likelihood over event intervals; optionally fills
// the gradient and (negative Hessian) information matrix.
double evaluate(const Panel& panel, const CoxDesign& d, const Eigen::VectorXd& beta,
                const RowWeights* weights, Eigen::VectorXd* grad,
                Eigen::MatrixXd* info) {
  const int p = d.p();
  double ll = 0.0;
  if (grad) grad->setZero(p);
  if (info) info->setZero(p, p);
  Eigen::RowVectorXd x(p);

  for (int t = 0; t <= panel.t_max; ++t) {
    double event_weight = 0.0;
    Eigen::VectorXd event_x = Eigen::VectorXd::Zero(p);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    bool any_event = false;

    for (int i = 0; i < panel.n_subjects(); ++i) {
      const auto& s = panel.subjects[static_cast<std::size_t>(i)];
      if (!s.at_risk(t)) continue;
      d.fill(s, t, x);
      const double w = row_weight(weights, i, t);
      const double r = w * std::exp(x.dot(beta));
      s0 += r;
      s1 += r * x.transpose();
      if (info) s2 += r * x.transpose() * x;
      if (s.event && s.exit_t() == t) {
        any_event = true;
        event_weight += w;
        event_x += w * x.transpose();
        ll += w * x.dot(beta);
        if (grad) *grad += w * x.transpose();
      }
    }
    if (!any_event) continue;
    ll -= event_weight * std::log(s0);
    if (grad) *grad -= event_weight * s1 / s0;
    if (info)
      *info += event_weight * (s2 / s0 - (s1 / s0) * (s1 / s0).transpose());
  }
  return ll;
}

}  // namespace

double CoxFit::hr(const std::string& name) const {
  auto it = std::find(coef_names.begin(), coef_names.end(), name);
  if (it == coef_names.end()) throw UnknownCoefficient(name);
  return hazard_ratios(it - coef_names.begin());
}

double cox_log_partial_likelihood(const Panel& panel, const Formula& formula,
                                  const Eigen::VectorXd& beta,
                                  const RowWeights* weights,
                                  Eigen::VectorXd* gradient) {
  CoxDesign d = make_design(panel, formula);
  return evaluate(panel, d, beta, weights, gradient, nullptr);
}

CoxFit fit_cox(const Panel& panel, const Formula& formula,
               const RowWeights* weights) {
  CoxDesign d = make_design(panel, formula);
  const int p = d.p();
  if (panel.n_events() == 0) throw CoxError("no events in panel");

  CoxFit fit;
  fit.coef_names = d.names;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd info(p, p);

  if (p == 0) {
    fit.log_partial_likelihood = evaluate(panel, d, beta, weights, nullptr, nullptr);
    fit.coef.resize(0);
    fit.hazard_ratios.resize(0);
    fit.std_errors.resize(0);
    return fit;
  }

  double ll = evaluate(panel, d, beta, weights, &grad, &info);
  const int max_iter = 60;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    fit.gradient_norm = grad.cwiseAbs().maxCoeff();
    if (fit.gradient_norm < 1e-8) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
      throw CoxError("information matrix not positive definite");
    Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd bn = beta + step;
    double lln = evaluate(panel, d, bn, weights, nullptr, nullptr);
    // Tolerate rounding noise in the likelihood near the optimum, where
    // the true improvement per step drops below evaluation precision.
    const double slack = 1e-9 * (std::abs(ll) + 1.0);
    int halvings = 0;
    while ((!std::isfinite(lln) || lln < ll - slack) && halvings < 30) {
      scale *= 0.5;
      bn = beta + scale * step;
      lln = evaluate(panel, d, bn, weights, nullptr, nullptr);
      ++halvings;
    }
    beta = bn;
    ll = evaluate(panel, d, beta, weights, &grad, &info);

    // A coefficient running away while the likelihood keeps creeping up
    // signals separation (no finite MLE).
    Eigen::Index worst;
    if (beta.cwiseAbs().maxCoeff(&worst) > 15.0)
      throw MonotoneLikelihood(d.names[static_cast<std::size_t>(worst)]);
  }
  if (iter >= max_iter)
    throw CoxError("no convergence after " + std::to_string(max_iter) +
                   " Newton iterations");

  fit.coef = beta;
  fit.hazard_ratios = beta.array().exp();
  fit.log_partial_likelihood = ll;
  fit.iterations = iter;
  Eigen::MatrixXd cov = info.fullPivLu().inverse();
  fit.std_errors = cov.diagonal().array().max(0.0).sqrt();
  return fit;
}

}  // namespace cfsurv
