#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfsurv/aalen.hpp"
#include "cfsurv/counterfactual.hpp"
#include "cfsurv/panel.hpp"

namespace cfsurv {

struct GridMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Right-continuous step function on the interval grid, evaluated densely
// at t = 0..t_max. Variance and bands are optional (empty when absent).
struct CumulativeCurve {
  std::string label;
  std::vector<double> values;    // index t
  std::vector<double> variance;  // robust, empty if unavailable
  std::vector<double> lower;     // band, empty if unavailable
  std::vector<double> upper;

  int t_max() const { return static_cast<int>(values.size()) - 1; }
  double at(int t) const;
  double range() const;  // max - min over the grid
};

// Dense treatment-coefficient curve from an additive fit.
CumulativeCurve coefficient_curve(const AdditiveFit& fit, const std::string& name,
                                  int t_max, const std::string& label);

// Plug-in ATT estimate: treatment cumulative coefficient plus the covariate
// terms sum_j sum_{u<=t} (a_j(u) - b_j(u)) dGamma_j(u). The fit must come
// from the observed (unmanipulated) panel with the full covariate set.
CumulativeCurve att_direct(const AdditiveFit& fit, const TreatedAverages& avgs);

// Shortcut: additive fit on the manipulated panel; the treatment cumulative
// coefficient estimates the ATT.
CumulativeCurve att_shortcut(const Panel& manipulated, const Formula& formula);

struct MediationCurves {
  CumulativeCurve direct;    // the treatment coefficient itself
  CumulativeCurve indirect;  // transmitted through the covariate differences
};

MediationCurves mediation_decompose(const AdditiveFit& fit,
                                    const TreatedAverages& avgs);

enum class AttEstimator { direct, shortcut };

struct BootstrapOptions {
  int replicates = 200;
  double level = 0.95;
  std::uint64_t seed = 1;
  CfConfig cf_config;
  Formula formula;  // used by both estimators for the outcome fit
};

struct BootstrapResult {
  CumulativeCurve curve;  // point estimate with percentile bands attached
  int failures = 0;
};

// Subject-level resampling; each replicate re-runs counterfactual imputation
// and the outcome fit end-to-end. Replicate failures are tolerated up to 10%.
BootstrapResult bootstrap_band(AttEstimator estimator, const Panel& panel,
                               const BootstrapOptions& options);

void write_curve(const CumulativeCurve& curve, std::ostream& out);

}  // namespace cfsurv
