#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfsurv/aalen.hpp"
#include "cfsurv/panel.hpp"

namespace cfsurv {

struct CoxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MonotoneLikelihood : CoxError {
  explicit MonotoneLikelihood(const std::string& coef)
      : CoxError("monotone partial likelihood: no finite MLE for " + coef),
        coefficient(coef) {}
  std::string coefficient;
};

struct CoxFit {
  std::vector<std::string> coef_names;
  Eigen::VectorXd coef;
  Eigen::VectorXd hazard_ratios;  // exp(coef)
  Eigen::VectorXd std_errors;     // observed-information
  double log_partial_likelihood = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;

  double hr(const std::string& name) const;
};

// Cox proportional hazards with time-varying covariates on the interval
// grid, Breslow tie handling, Newton iterations with step halving.
// The formula's intercept flag is ignored (no intercept in a Cox model).
CoxFit fit_cox(const Panel& panel, const Formula& formula,
               const RowWeights* weights = nullptr);

// Log partial likelihood and its analytic gradient at an arbitrary point
// (exposed for derivative checks).
double cox_log_partial_likelihood(const Panel& panel, const Formula& formula,
                                  const Eigen::VectorXd& beta,
                                  const RowWeights* weights = nullptr,
                                  Eigen::VectorXd* gradient = nullptr);

}  // namespace cfsurv
