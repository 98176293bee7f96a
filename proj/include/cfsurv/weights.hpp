#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfsurv/aalen.hpp"
#include "cfsurv/panel.hpp"

namespace cfsurv {

struct WeightError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PooledOutcome { treatment_start, censoring };

// Piecewise-constant time basis: one indicator per block of intervals.
struct TimeBasis {
  int block_length = 3;  // default: quarters of the usual 12-interval grid
  int n_blocks(int t_max) const { return t_max / block_length + 1; }
};

struct PooledLogisticSpec {
  PooledOutcome outcome = PooledOutcome::treatment_start;
  std::vector<std::string> baselines;
  std::vector<std::string> covariates;  // time-varying terms (denominator)
  TimeBasis time_basis;
};

struct PooledLogisticFit {
  PooledLogisticSpec spec;
  std::vector<std::string> term_names;
  Eigen::VectorXd coef;
  std::vector<std::string> dropped_terms;  // zero-variance columns
  int iterations = 0;
  double gradient_norm = 0.0;
  bool perfect_prediction = false;
  int t_max = 0;

  // Fitted probability of the modelled outcome at (subject, t).
  double probability(const Panel& panel, int subject, int t) const;
};

struct WeightSet {
  // Indexed [subject][t] over each subject's rows.
  RowWeights treatment;
  RowWeights censoring;
  RowWeights combined;
  int truncated_count = 0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;

  double mean_combined(const Panel& panel) const;
  double max_combined() const;
};

// Discrete-time hazard model for treatment start or censoring, fit by
// damped Newton iterations on the pooled person-interval rows.
PooledLogisticFit fit_pooled_logistic(const Panel& panel,
                                      const PooledLogisticSpec& spec);

// Stabilized cumulative-product weights. Treatment weights freeze at the
// start interval; censoring weights accumulate over all at-risk intervals.
// Truncation percentiles apply to the combined weights (default 1/99).
struct TruncationSpec {
  double lower_pct = 0.01;
  double upper_pct = 0.99;
};

WeightSet stabilized_weights(const Panel& panel, const PooledLogisticFit& num_fit,
                             const PooledLogisticFit& den_fit,
                             const PooledLogisticFit* cens_num = nullptr,
                             const PooledLogisticFit* cens_den = nullptr,
                             const TruncationSpec& truncation = {});

// Weighted additive fit whose treatment curve is the marginal structural
// (ATE) estimate; the formula must exclude time-varying confounders.
AdditiveFit msm_additive(const Panel& panel, const WeightSet& weights,
                         const Formula& formula);

void write_weights(const Panel& panel, const WeightSet& weights, std::ostream& out);

}  // namespace cfsurv
