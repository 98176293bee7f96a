#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfsurv/panel.hpp"

namespace cfsurv {

struct UnknownCoefficient : std::runtime_error {
  explicit UnknownCoefficient(const std::string& name)
      : std::runtime_error("unknown coefficient: " + name) {}
};

// Term selection for the additive hazards design matrix. The intercept
// column doubles as the constant entry of the baseline vector c.
struct Formula {
  bool intercept = true;
  bool treatment = true;
  std::vector<std::string> baselines;   // subset of panel.baseline_names
  std::vector<std::string> covariates;  // subset of panel.covariate_names

  static Formula treatment_only() { return {true, true, {}, {}}; }
  static Formula full(const Panel& panel) {
    return {true, true, panel.baseline_names, panel.covariate_names};
  }
};

// Per-row weights indexed [subject][t]; missing entries count as 1.
using RowWeights = std::vector<std::vector<double>>;

// Cumulative regression coefficients of the additive hazards model as step
// functions, one increment per interval that contains at least one event.
struct AdditiveFit {
  std::vector<std::string> coef_names;
  std::vector<int> times;               // intervals with an estimated increment
  Eigen::MatrixXd increments;           // times x p
  Eigen::MatrixXd cumulative;           // times x p, running sums
  Eigen::MatrixXd increment_var;        // times x p, per-step robust variances
  std::vector<Eigen::MatrixXd> robust_cov;  // per-time covariance of cumulative
  std::vector<int> risk_sizes;          // at-risk count per increment
  std::vector<int> skipped_intervals;   // singular or empty-risk intervals
  int n_events = 0;

  int coef_index(const std::string& name) const;
  // Step-function evaluation, right-continuous: (value, robust SE).
  std::pair<double, double> curve_at(const std::string& name, int t) const;
};

struct SlopeTestResult {
  std::string coefficient;
  double statistic = 0.0;  // standard-normal scale
  double p_value = 1.0;    // two-sided
};

// Aalen's nonparametric additive hazards estimator on the interval grid:
// at each interval with events, dB(t) = (X'WX)^-1 X'W dN over the at-risk
// rows. Rank-deficient or empty intervals are skipped and recorded.
AdditiveFit fit_additive(const Panel& panel, const Formula& formula,
                         const RowWeights* weights = nullptr);

// Test for zero slope of one cumulative coefficient, with weight w(t) equal
// to the at-risk count (configurable to unit weights).
enum class SlopeWeight { risk_size, unit };
SlopeTestResult slope_test(const AdditiveFit& fit, const std::string& coefficient,
                           SlopeWeight weighting = SlopeWeight::risk_size);

void write_additive_fit(const AdditiveFit& fit, std::ostream& out);

}  // namespace cfsurv
