#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfsurv/panel.hpp"

namespace cfsurv {

struct FlimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options controlling which person-intervals contribute increments.
struct FlimOptions {
  bool include_constant = true;
  // Restrict fitting to increments whose endpoints were both measured
  // (by default LOCF-carried cells count as observed).
  bool measured_only = false;
  // Fit on untreated person-time only: B = 0 at both increment endpoints.
  bool untreated_only = false;
};

// Per-interval increment-dynamics coefficients. Row layout of each beta(t):
// (constant if present, lagged responses, baseline adjustments) x responses.
struct FlimFit {
  std::vector<std::string> responses;
  std::vector<std::string> adjustments;
  bool has_constant = true;
  std::vector<Eigen::MatrixXd> betas;   // index t-1 for t = 1..t_max
  std::vector<bool> estimable;          // per t
  std::vector<int> fitted_counts;       // observed increments used per t
  int t_max = 0;

  int design_dim() const {
    return (has_constant ? 1 : 0) + static_cast<int>(responses.size()) +
           static_cast<int>(adjustments.size());
  }
  // beta for interval t, falling back to the nearest earlier estimable one.
  // Throws FlimError when none exists.
  const Eigen::MatrixXd& beta_for(int t) const;
};

struct ImputedPanel {
  const Panel* base = nullptr;
  // values[i] is n_rows x m hypothetical complete estimates per subject.
  std::vector<Eigen::MatrixXd> values;
  // provenance[i](t, j): 1 = observed, 0 = imputed.
  std::vector<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> provenance;
};

// Per-interval least squares for the linear increments dynamics: beta(t)
// solves the normal equations over subjects whose increment at t is usable
// under the options. No smoothing across t.
FlimFit fit_flim(const Panel& panel, const std::vector<std::string>& responses,
                 const std::vector<std::string>& adjustments = {},
                 const FlimOptions& options = {});

// Reconstructs hypothetical complete trajectories by the iterative rule:
// observed cells reset the state to the data, missing cells advance the
// state by the model increment. Runs to each subject's exit.
ImputedPanel impute_hypothetical(const FlimFit& fit, const Panel& panel);

void write_flim_fit(const FlimFit& fit, std::ostream& out);

}  // namespace cfsurv
