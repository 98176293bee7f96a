#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfsurv/flim.hpp"
#include "cfsurv/panel.hpp"

namespace cfsurv {

struct CounterfactualError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configuration for the counterfactual imputation step.
struct CfConfig {
  std::vector<std::string> responses;    // default: all time-varying covariates
  std::vector<std::string> adjustments;  // baseline names entering the dynamics
  bool measured_only = false;            // restrict FLIM to measured increments
};

// A panel augmented with imputed no-treatment covariate trajectories for
// treated person-time. L0 is defined on S_i <= t <= exit_i per subject.
struct CfPanel {
  const Panel* base = nullptr;
  std::vector<std::string> responses;
  FlimFit dynamics;  // fitted on untreated person-time only
  // l0[i] is empty for untreated subjects, otherwise (exit - S + 1) x m with
  // row r holding the imputed values at t = S + r.
  std::vector<Eigen::MatrixXd> l0;

  bool has_l0(int subject, int t) const;
  double l0_at(int subject, int t, int response) const;
};

struct TreatedAverages {
  std::vector<std::string> responses;
  // Per interval t = 0..t_max: risk size r(t); a_hat/b_hat are t x m,
  // meaningful only where r(t) > 0.
  std::vector<int> risk_sizes;
  Eigen::MatrixXd a_hat;  // treated-set mean of observed values
  Eigen::MatrixXd b_hat;  // treated-set mean of counterfactual values
};

// Fits FLIM on untreated increments and runs the iterative reconstruction
// for every treated subject from its last pre-treatment state forward to
// exit. Never modifies pre-treatment rows or untreated subjects.
CfPanel impute_counterfactual(const Panel& panel, const CfConfig& config = {});

// Treated-risk-set means of observed and counterfactual covariate values.
TreatedAverages treated_averages(const CfPanel& cf);

// Copy of the base panel where treated person-intervals carry the imputed
// no-treatment covariate values; everything else untouched.
Panel build_manipulated_panel(const CfPanel& cf);

void write_cf_panel(const CfPanel& cf, std::ostream& out);

}  // namespace cfsurv
