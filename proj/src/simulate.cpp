#include "cfsurv/simulate.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace cfsurv {

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::one: return "1";
    case Regime::two: return "2";
    case Regime::three: return "3";
    case Regime::randomized: return "randomized";
  }
  return "?";
}

Regime parse_regime(const std::string& s) {
  if (s == "1") return Regime::one;
  if (s == "2") return Regime::two;
  if (s == "3") return Regime::three;
  if (s == "randomized" || s == "4") return Regime::randomized;
  throw std::invalid_argument("unknown regime: " + s);
}

RegimeConfig RegimeConfig::defaults(Regime regime, int n, std::uint64_t seed) {
  RegimeConfig c;
  c.regime = regime;
  c.n = n;
  c.seed = seed;
  switch (regime) {
    case Regime::one:
      c.treat_slope = -0.05;  // low L favours starting treatment
      break;
    case Regime::two:
      c.treat_slope = -0.012;  // close to randomized
      break;
    case Regime::three:
      c.treat_slope = 0.06;  // high L favours starting treatment
      break;
    case Regime::randomized:
      break;
  }
  return c;
}

double RegimeConfig::treat_probability(double l) const {
  if (regime == Regime::randomized) return treat_flat_prob;
  double eta = treat_intercept + treat_slope * (l - treat_center);
  return 1.0 / (1.0 + std::exp(-eta));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Pre-drawn randomness for one subject, shared between arms under common
// random numbers. Draw order is fixed so both arms consume identically.
struct SubjectDraws {
  double u_init;
  std::vector<double> u_treat;
  std::vector<double> u_event;
  std::vector<double> noise;
};

SubjectDraws draw_subject(std::uint64_t seed, int t_max) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  SubjectDraws d;
  d.u_init = unif(rng);
  d.u_treat.resize(static_cast<std::size_t>(t_max) + 1);
  d.u_event.resize(static_cast<std::size_t>(t_max) + 1);
  d.noise.resize(static_cast<std::size_t>(t_max) + 1);
  for (int t = 0; t <= t_max; ++t) {
    d.u_treat[static_cast<std::size_t>(t)] = unif(rng);
    d.u_event[static_cast<std::size_t>(t)] = unif(rng);
    d.noise[static_cast<std::size_t>(t)] = norm(rng);
  }
  return d;
}

// One trajectory. offer_treatment = false gives the untreated arm.
SubjectRecord simulate_arm(const RegimeConfig& cfg, const SubjectDraws& d,
                           const std::string& id, bool offer_treatment,
                           int* clamped, std::size_t* intervals) {
  SubjectRecord s;
  s.id = id;
  double l = std::sqrt(25.0 + 975.0 * d.u_init);
  bool on_treatment = false;

  std::vector<double> l_path;
  std::vector<std::uint8_t> b_path;
  bool event = false;
  for (int t = 0; t <= cfg.t_max; ++t) {
    if (offer_treatment && !on_treatment &&
        d.u_treat[static_cast<std::size_t>(t)] < cfg.treat_probability(l)) {
      on_treatment = true;
      if (!s.treat_start) s.treat_start = t;
    }
    l_path.push_back(l);
    b_path.push_back(on_treatment ? 1 : 0);
    if (t == cfg.t_max) break;

    double p = cfg.hazard_intercept + (on_treatment ? cfg.hazard_treat : 0.0) +
               cfg.hazard_covariate * (cfg.l_ref - l);
    ++*intervals;
    if (p < 0.0 || p > 1.0) {
      ++*clamped;
      p = std::min(1.0, std::max(0.0, p));
    }
    if (d.u_event[static_cast<std::size_t>(t)] < p) {
      event = true;
      break;
    }
    l += (on_treatment ? cfg.drift_treated : cfg.drift_untreated) +
         cfg.noise_sd * d.noise[static_cast<std::size_t>(t)];
  }

  const int rows = static_cast<int>(l_path.size());
  s.treat = b_path;
  s.cov.resize(rows, 1);
  s.observed.resize(rows, 1);
  for (int t = 0; t < rows; ++t) {
    s.cov(t, 0) = l_path[static_cast<std::size_t>(t)];
    s.observed(t, 0) = 1;
  }
  s.baseline.resize(0);
  s.event = event;
  s.censored = !event;  // administrative censoring at t_max
  return s;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  std::uint64_t x = splitmix64(master ^ 0xA0761D6478BD642FULL);
  x = splitmix64(x ^ splitmix64(a));
  x = splitmix64(x ^ splitmix64(b + 0x9E37ULL));
  x = splitmix64(x ^ splitmix64(c + 0x79B9ULL));
  return x;
}

SimCohort generate_cohort(const RegimeConfig& config) {
  if (config.n < 1) throw std::invalid_argument("generate_cohort: n must be >= 1");
  SimCohort cohort;
  for (Panel* p : {&cohort.observed, &cohort.counterfactual_untreated}) {
    p->covariate_names = {"L"};
    p->baseline_names = {};
    p->t_max = config.t_max;
  }

  cohort.untreated_l.resize(config.n, config.t_max + 1);
  for (int i = 0; i < config.n; ++i) {
    const std::string id = "s" + std::to_string(i);
    auto draws = draw_subject(
        mix_seed(config.seed, static_cast<std::uint64_t>(i)), config.t_max);
    cohort.observed.subjects.push_back(simulate_arm(
        config, draws, id, true, &cohort.clamped_intervals, &cohort.person_intervals));

    // Untreated L path over the whole horizon; it only depends on the initial
    // value and the noise draws, not on survival or treatment offers.
    double l = std::sqrt(25.0 + 975.0 * draws.u_init);
    for (int t = 0; t <= config.t_max; ++t) {
      cohort.untreated_l(i, t) = l;
      l += config.drift_untreated + config.noise_sd * draws.noise[static_cast<std::size_t>(t)];
    }

    if (!config.common_random_numbers) {
      draws = draw_subject(
          mix_seed(config.seed, static_cast<std::uint64_t>(i), 0x0CF), config.t_max);
    }
    int dummy_clamped = 0;
    std::size_t dummy_intervals = 0;
    cohort.counterfactual_untreated.subjects.push_back(simulate_arm(
        config, draws, id, false, &dummy_clamped, &dummy_intervals));
  }
  return cohort;
}

Panel build_reference_manipulated(const SimCohort& cohort) {
  Panel out = cohort.observed;
  for (int i = 0; i < out.n_subjects(); ++i) {
    auto& s = out.subjects[static_cast<std::size_t>(i)];
    if (!s.treat_start) continue;
    for (int t = *s.treat_start; t <= s.exit_t(); ++t)
      s.cov(t, 0) = cohort.untreated_l(i, t);
  }
  return out;
}

Panel build_full_counterfactual(const SimCohort& cohort) {
  // Treated subjects paired with their own untreated-arm trajectories,
  // both entering the risk set at the treatment start S: a treatment-only
  // fit on this panel is the ATT reference. Entering earlier would place
  // guaranteed-event-free pre-treatment person-time in the untreated pool
  // (immortal-time bias); never-treated subjects stay out so the contrast
  // is within the treated subpopulation.
  Panel out = cohort.observed;
  out.subjects.clear();
  for (int i = 0; i < cohort.observed.n_subjects(); ++i) {
    const auto& obs = cohort.observed.subjects[static_cast<std::size_t>(i)];
    if (!obs.treat_start) continue;
    auto treated = obs;
    treated.entry_t = *obs.treat_start;
    out.subjects.push_back(std::move(treated));
    auto copy = cohort.counterfactual_untreated.subjects[static_cast<std::size_t>(i)];
    copy.id += "_cf";
    copy.entry_t = *obs.treat_start;
    if (copy.entry_t > copy.exit_t()) continue;  // cf arm exited before S
    out.subjects.push_back(std::move(copy));
  }
  return out;
}

}  // namespace cfsurv
