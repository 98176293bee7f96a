#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "cfsurv/counterfactual.hpp"
#include "cfsurv/simulate.hpp"

using namespace cfsurv;

namespace {

SubjectRecord make_subject(const std::string& id, const std::vector<double>& l,
                           int treat_start, bool event) {
  SubjectRecord s;
  s.id = id;
  const int n = static_cast<int>(l.size());
  s.treat.assign(static_cast<std::size_t>(n), 0);
  if (treat_start >= 0) {
    for (int t = treat_start; t < n; ++t) s.treat[static_cast<std::size_t>(t)] = 1;
    s.treat_start = treat_start;
  }
  s.cov.resize(n, 1);
  s.observed.resize(n, 1);
  for (int t = 0; t < n; ++t) {
    s.cov(t, 0) = l[static_cast<std::size_t>(t)];
    s.observed(t, 0) = 1;
  }
  s.baseline.resize(0);
  s.event = event;
  s.censored = !event;
  return s;
}

Panel one_covariate_panel(std::vector<SubjectRecord> subjects) {
  Panel panel;
  panel.covariate_names = {"L"};
  for (auto& s : subjects) {
    panel.t_max = std::max(panel.t_max, s.exit_t());
    panel.subjects.push_back(std::move(s));
  }
  return panel;
}

}  // namespace

TEST_CASE("counterfactual values are defined exactly on the treated window") {
  // Untreated subjects supply the dynamics; one subject treated at S=3
  // with an event at t=6.
  auto panel = one_covariate_panel({
      make_subject("u1", {10, 9, 8, 7, 6, 5, 4}, -1, false),
      make_subject("u2", {8, 7, 6, 5, 4, 3, 2}, -1, false),
      make_subject("u3", {12, 11, 10, 9, 8, 7, 6}, -1, false),
      make_subject("tr", {10, 9, 8, 9, 10, 11, 12}, 3, true),
  });
  auto cf = impute_counterfactual(panel);
  for (int t = 0; t <= 6; ++t) CHECK(cf.has_l0(3, t) == (t >= 3));
  CHECK_FALSE(cf.has_l0(0, 3));
}

TEST_CASE("noise-free decrement dynamics iterate exactly") {
  // Untreated dynamics dL = -1 exactly; treated subject has L(2) = 10 and
  // starts at S = 3, so L0 = (9, 8, 7) at t = 3, 4, 5.
  auto panel = one_covariate_panel({
      make_subject("u1", {10, 9, 8, 7, 6, 5}, -1, false),
      make_subject("u2", {6, 5, 4, 3, 2, 1}, -1, false),
      make_subject("u3", {13, 12, 11, 10, 9, 8}, -1, false),
      make_subject("tr", {12, 11, 10, 12, 14, 16}, 3, true),
  });
  auto cf = impute_counterfactual(panel);
  CHECK(cf.l0_at(3, 3, 0) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(cf.l0_at(3, 4, 0) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(cf.l0_at(3, 5, 0) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("treatment that raises L yields counterfactuals below observed") {
  auto cfg = RegimeConfig::defaults(Regime::one, 800, 97);
  auto panel = generate_cohort(cfg).observed;
  auto cf = impute_counterfactual(panel);
  double sum_obs = 0, sum_cf = 0;
  int count = 0;
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    if (!s.treat_start) continue;
    for (int t = *s.treat_start; t <= s.exit_t(); ++t) {
      sum_obs += s.cov(t, 0);
      sum_cf += cf.l0_at(i, t, 0);
      ++count;
    }
  }
  REQUIRE(count > 0);
  CHECK(sum_cf / count < sum_obs / count);
}

TEST_CASE("treated averages equal a group-by oracle") {
  auto cfg = RegimeConfig::defaults(Regime::two, 400, 19);
  auto panel = generate_cohort(cfg).observed;
  auto cf = impute_counterfactual(panel);
  auto avgs = treated_averages(cf);
  for (int t = 0; t <= panel.t_max; ++t) {
    double a = 0, b = 0;
    int r = 0;
    for (int i = 0; i < panel.n_subjects(); ++i) {
      const auto& s = panel.subjects[static_cast<std::size_t>(i)];
      if (!s.at_risk(t) || !s.treat_start || !(*s.treat_start <= t)) continue;
      a += s.cov(t, 0);
      b += cf.l0_at(i, t, 0);
      ++r;
    }
    CHECK(avgs.risk_sizes[static_cast<std::size_t>(t)] == r);
    if (r > 0) {
      CHECK(avgs.a_hat(t, 0) == doctest::Approx(a / r).epsilon(1e-13));
      CHECK(avgs.b_hat(t, 0) == doctest::Approx(b / r).epsilon(1e-13));
    }
  }
}

TEST_CASE("treated averages: mean of two") {
  auto panel = one_covariate_panel({
      make_subject("u1", {4, 4, 4}, -1, false),
      make_subject("u2", {6, 6, 6}, -1, false),
      make_subject("t1", {5, 5, 4}, 1, false),
      make_subject("t2", {5, 5, 6}, 1, false),
  });
  auto cf = impute_counterfactual(panel);
  auto avgs = treated_averages(cf);
  CHECK(avgs.risk_sizes[2] == 2);
  CHECK(avgs.a_hat(2, 0) == doctest::Approx(5.0));
}

TEST_CASE("treated averages are invariant under subject reordering") {
  auto cfg = RegimeConfig::defaults(Regime::three, 200, 29);
  auto panel = generate_cohort(cfg).observed;
  auto shuffled = panel;
  std::mt19937 rng(8);
  std::shuffle(shuffled.subjects.begin(), shuffled.subjects.end(), rng);
  auto a = treated_averages(impute_counterfactual(panel));
  auto b = treated_averages(impute_counterfactual(shuffled));
  CHECK(a.risk_sizes == b.risk_sizes);
  CHECK((a.a_hat - b.a_hat).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.b_hat - b.b_hat).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("manipulated panel replaces only treated person-time") {
  auto panel = one_covariate_panel({
      make_subject("u1", {10, 9, 8, 7, 6, 5}, -1, false),
      make_subject("u2", {6, 5, 4, 3, 2, 1}, -1, false),
      make_subject("u3", {13, 12, 11, 10, 9, 8}, -1, false),
      make_subject("tr", {12, 11, 10, 12, 14, 16}, 3, true),
  });
  auto cf = impute_counterfactual(panel);
  auto manip = build_manipulated_panel(cf);
  // Untreated subjects byte-identical.
  for (int i = 0; i < 3; ++i)
    CHECK(manip.subjects[static_cast<std::size_t>(i)].cov ==
          panel.subjects[static_cast<std::size_t>(i)].cov);
  // Treated rows carry the imputed values; flags untouched.
  const auto& tr = manip.subjects[3];
  CHECK(tr.cov(3, 0) == doctest::Approx(9.0));
  CHECK(tr.cov(4, 0) == doctest::Approx(8.0));
  CHECK(tr.cov(5, 0) == doctest::Approx(7.0));
  CHECK(tr.cov(2, 0) == 10.0);  // pre-treatment untouched
  CHECK(tr.treat[3] == 1);
  CHECK(tr.event);
}

TEST_CASE("entirely untreated panel is returned unchanged") {
  auto panel = one_covariate_panel({
      make_subject("u1", {10, 9, 8}, -1, false),
      make_subject("u2", {6, 5, 4}, -1, true),
  });
  auto cf = impute_counterfactual(panel);
  auto manip = build_manipulated_panel(cf);
  for (int i = 0; i < 2; ++i)
    CHECK(manip.subjects[static_cast<std::size_t>(i)].cov ==
          panel.subjects[static_cast<std::size_t>(i)].cov);
}

TEST_CASE("noise-free generator continuation is recovered exactly") {
  // Treatment-free world with deterministic drift: the imputed L0 must
  // equal the generator's own untreated continuation.
  auto cfg = RegimeConfig::defaults(Regime::one, 300, 61);
  cfg.noise_sd = 0.0;
  auto cohort = generate_cohort(cfg);
  auto cf = impute_counterfactual(cohort.observed);
  for (int i = 0; i < cohort.observed.n_subjects(); ++i) {
    const auto& obs = cohort.observed.subjects[static_cast<std::size_t>(i)];
    const auto& untreated = cohort.counterfactual_untreated.subjects[static_cast<std::size_t>(i)];
    if (!obs.treat_start) continue;
    const int last = std::min(obs.exit_t(), untreated.exit_t());
    for (int t = *obs.treat_start; t <= last; ++t)
      CHECK(cf.l0_at(i, t, 0) ==
            doctest::Approx(untreated.cov(t, 0)).epsilon(1e-9));
  }
}
