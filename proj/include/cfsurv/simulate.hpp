#pragma once

#include <cstdint>
#include <string>

#include "cfsurv/panel.hpp"

namespace cfsurv {

enum class Regime { one = 1, two = 2, three = 3, randomized = 4 };

std::string regime_name(Regime r);
Regime parse_regime(const std::string& s);

// Discrete-time cohort generator with a single time-varying covariate L
// that confounds treatment start. Treatment-start probability is logistic
// in the current L (flat for the randomized regime); L drifts down while
// untreated and up under treatment; the per-interval event probability is
// linear in treatment status and L.
struct RegimeConfig {
  Regime regime = Regime::one;
  int n = 1000;
  int t_max = 11;
  std::uint64_t seed = 1;

  // Treatment-start mechanism.
  double treat_flat_prob = 0.07;  // randomized regime
  // Logistic start model for regimes 1-3; the intercept matches the
  // randomized regime's flat rate so marginal treatment timing is comparable.
  double treat_intercept = -2.6;  // logit scale
  double treat_slope = 0.0;       // per unit of (L - treat_center), set per regime
  double treat_center = 20.0;

  // Covariate dynamics.
  double drift_untreated = -1.0;
  double drift_treated = 1.0;
  double noise_sd = 1.0;

  // Event mechanism: P(event in [t,t+1)) = a0 + aB B(t) + aL (l_ref - L(t)).
  double hazard_intercept = 0.05;
  double hazard_treat = -0.006;
  double hazard_covariate = 0.0012;
  double l_ref = 22.0;

  // Counterfactual arm replays the same draws (common random numbers).
  bool common_random_numbers = true;

  static RegimeConfig defaults(Regime regime, int n, std::uint64_t seed);
  double treat_probability(double l) const;
};

struct SimCohort {
  Panel observed;
  Panel counterfactual_untreated;  // same subjects, treatment never offered
  // Untreated-arm L for every subject and interval, continued past the exit
  // time (covariate dynamics do not depend on survival), n x (t_max + 1).
  Eigen::MatrixXd untreated_l;
  int clamped_intervals = 0;       // event probabilities clipped to [0,1]
  std::size_t person_intervals = 0;

  double clamp_rate() const {
    return person_intervals ? static_cast<double>(clamped_intervals) /
                                  static_cast<double>(person_intervals)
                            : 0.0;
  }
};

SimCohort generate_cohort(const RegimeConfig& config);

// Observed panel stacked with the untreated-arm trajectories of everyone
// who started treatment (fresh ids). A treatment-only fit on this panel is
// the simulated ATT reference.
Panel build_full_counterfactual(const SimCohort& cohort);

// Observed panel with each treated subject's post-start covariate values
// replaced by the untreated-arm path they would have followed. Fitting the
// same model here as on the imputation-based manipulated panel isolates the
// error introduced by the imputation step.
Panel build_reference_manipulated(const SimCohort& cohort);

// Deterministic RNG substream derived from a master seed and stream labels.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

}  // namespace cfsurv
