#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfsurv/att.hpp"
#include "cfsurv/cox.hpp"
#include "cfsurv/study.hpp"
#include "cfsurv/svg.hpp"
#include "cfsurv/weights.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

// Exit codes: 0 ok, 1 unexpected, 2 bad usage (CLI parse), 3 I/O or config,
// 4 invalid or empty data, 5 model/estimation failure.
constexpr int kExitIo = 3;
constexpr int kExitData = 4;
constexpr int kExitModel = 5;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open output file: " + path);
  return out;
}

cfsurv::Panel load_input(const std::string& path, const std::string& schema_path) {
  cfsurv::PanelSchema schema;
  if (!schema_path.empty()) schema = cfsurv::PanelSchema::parse_file(schema_path);
  auto panel = cfsurv::load_panel_file(path, schema);
  return cfsurv::locf_expand(panel);
}

void require_treated(const cfsurv::Panel& panel) {
  if (panel.n_treated() == 0)
    throw cfsurv::PanelError("no treated person-time in input panel");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual-imputation survival analysis: additive hazards "
               "ATT estimation with linear-increments covariate imputation, "
               "MSM and Cox comparators, and the replicated simulation study."};
  app.set_config("--config");
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "Cap worker threads (0 = library default); results do not "
                 "depend on this setting");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Generate a cohort under one regime");
  std::string sim_regime = "1", sim_out, sim_full_out;
  int sim_n = 1000;
  std::uint64_t sim_seed = 0;
  sim->add_option("--regime", sim_regime, "1|2|3|randomized")->capture_default_str();
  sim->add_option("--n", sim_n, "cohort size")->capture_default_str();
  sim->add_option("--seed", sim_seed, "RNG seed")->required();
  sim->add_option("--out", sim_out, "output panel CSV")->required();
  sim->add_option("--full-counterfactual", sim_full_out,
                  "also write the stacked full-counterfactual panel");

  // ---- impute ----
  auto* imp = app.add_subcommand(
      "impute", "Impute counterfactual no-treatment trajectories");
  std::string imp_in, imp_schema, imp_out, imp_manip;
  std::vector<std::string> imp_adjust;
  imp->add_option("--input", imp_in, "panel CSV")->required();
  imp->add_option("--schema", imp_schema, "column-mapping config");
  imp->add_option("--adjust", imp_adjust, "baseline columns entering the dynamics");
  imp->add_option("--out", imp_out, "long CSV with provenance column")->required();
  imp->add_option("--manipulated", imp_manip, "also write the manipulated panel");

  // ---- att ----
  auto* att = app.add_subcommand("att", "Estimate the ATT cumulative curve");
  std::string att_in, att_schema, att_out, att_svg, att_estimator = "shortcut";
  std::vector<std::string> att_adjust;
  int att_boot = 0;
  double att_level = 0.95;
  std::uint64_t att_seed = 0;
  att->add_option("--input", att_in, "panel CSV")->required();
  att->add_option("--schema", att_schema, "column-mapping config");
  att->add_option("--estimator", att_estimator, "direct|shortcut")->capture_default_str();
  att->add_option("--adjust", att_adjust, "baseline columns for the dynamics");
  att->add_option("--bootstrap", att_boot, "bootstrap replicates (0 = no bands)");
  att->add_option("--level", att_level, "band level")->capture_default_str();
  att->add_option("--seed", att_seed, "RNG seed (required with --bootstrap)");
  att->add_option("--out", att_out, "curve CSV")->required();
  att->add_option("--svg", att_svg, "step-plot SVG");

  // ---- msm ----
  auto* msm = app.add_subcommand(
      "msm", "Stabilized-IPTW marginal structural additive fit");
  std::string msm_in, msm_schema, msm_out, msm_svg, msm_weights_out;
  double msm_lo = 0.01, msm_hi = 0.99;
  msm->add_option("--input", msm_in, "panel CSV")->required();
  msm->add_option("--schema", msm_schema, "column-mapping config");
  msm->add_option("--truncate-lower", msm_lo, "lower truncation percentile")
      ->capture_default_str();
  msm->add_option("--truncate-upper", msm_hi, "upper truncation percentile")
      ->capture_default_str();
  msm->add_option("--out", msm_out, "treatment curve CSV")->required();
  msm->add_option("--weights", msm_weights_out, "per-row weight CSV");
  msm->add_option("--svg", msm_svg, "step-plot SVG");

  // ---- cox ----
  auto* cox = app.add_subcommand("cox", "Cox fit with time-varying covariates");
  std::string cox_in, cox_schema, cox_out;
  bool cox_treat_only = false;
  cox->add_option("--input", cox_in, "panel CSV")->required();
  cox->add_option("--schema", cox_schema, "column-mapping config");
  cox->add_flag("--treatment-only", cox_treat_only, "drop covariates from the model");
  cox->add_option("--out", cox_out, "coefficient CSV (default: stdout)");

  // ---- benchmark ----
  auto* bench = app.add_subcommand(
      "benchmark", "Replicated six-analysis study with Cox table output");
  std::string bench_dir;
  int bench_reps = 250, bench_n = 1000;
  std::uint64_t bench_seed = 0;
  bool bench_serial = false;
  bench->add_option("--reps", bench_reps, "replicates per regime")->capture_default_str();
  bench->add_option("--n", bench_n, "cohort size")->capture_default_str();
  bench->add_option("--seed", bench_seed, "master seed")->required();
  bench->add_option("--out-dir", bench_dir, "output directory")->required();
  bench->add_flag("--serial", bench_serial, "use the serial reference path");

  // ---- report ----
  auto* rep = app.add_subcommand(
      "report", "ATT vs MSM comparison overlay for one panel");
  std::string rep_in, rep_schema, rep_svg, rep_csv;
  rep->add_option("--input", rep_in, "panel CSV")->required();
  rep->add_option("--schema", rep_schema, "column-mapping config");
  rep->add_option("--svg", rep_svg, "overlay SVG")->required();
  rep->add_option("--out", rep_csv, "curve CSV (both estimators)");

  // ---- calibrate ----
  auto* cal = app.add_subcommand(
      "calibrate", "Report generator summary statistics for parameter tuning");
  std::string cal_regime = "1";
  int cal_n = 1000, cal_reps = 20;
  std::uint64_t cal_seed = 1;
  cal->add_option("--regime", cal_regime)->capture_default_str();
  cal->add_option("--n", cal_n)->capture_default_str();
  cal->add_option("--reps", cal_reps)->capture_default_str();
  cal->add_option("--seed", cal_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (*sim) {
      auto cfg = cfsurv::RegimeConfig::defaults(cfsurv::parse_regime(sim_regime),
                                                sim_n, sim_seed);
      auto cohort = cfsurv::generate_cohort(cfg);
      auto out = open_out(sim_out);
      cfsurv::write_panel(cohort.observed, out);
      if (!sim_full_out.empty()) {
        auto full = cfsurv::build_full_counterfactual(cohort);
        auto out2 = open_out(sim_full_out);
        cfsurv::write_panel(full, out2);
      }
      std::cerr << "simulate: n=" << cfg.n << " regime=" << sim_regime
                << " events=" << cohort.observed.n_events()
                << " treated=" << cohort.observed.n_treated()
                << " clamp_rate=" << cohort.clamp_rate() << "\n";
    } else if (*imp) {
      auto panel = load_input(imp_in, imp_schema);
      require_treated(panel);
      cfsurv::CfConfig cfg;
      cfg.adjustments = imp_adjust;
      auto cf = cfsurv::impute_counterfactual(panel, cfg);
      auto out = open_out(imp_out);
      cfsurv::write_cf_panel(cf, out);
      if (!imp_manip.empty()) {
        auto manip = cfsurv::build_manipulated_panel(cf);
        auto out2 = open_out(imp_manip);
        cfsurv::write_panel(manip, out2);
      }
    } else if (*att) {
      auto panel = load_input(att_in, att_schema);
      require_treated(panel);
      cfsurv::BootstrapOptions opts;
      opts.cf_config.adjustments = att_adjust;
      opts.formula = cfsurv::Formula::full(panel);
      auto kind = att_estimator == "direct" ? cfsurv::AttEstimator::direct
                                            : cfsurv::AttEstimator::shortcut;
      cfsurv::CumulativeCurve curve;
      if (att_boot > 0) {
        if (att_seed == 0)
          throw CLI::ValidationError("--seed", "required with --bootstrap");
        opts.replicates = att_boot;
        opts.level = att_level;
        opts.seed = att_seed;
        auto res = cfsurv::bootstrap_band(kind, panel, opts);
        curve = res.curve;
        if (res.failures > 0)
          std::cerr << "att: " << res.failures << " bootstrap replicates failed\n";
      } else {
        auto cf = cfsurv::impute_counterfactual(panel, opts.cf_config);
        if (kind == cfsurv::AttEstimator::shortcut) {
          curve = cfsurv::att_shortcut(cfsurv::build_manipulated_panel(cf), opts.formula);
        } else {
          auto fit = cfsurv::fit_additive(panel, opts.formula);
          curve = cfsurv::att_direct(fit, cfsurv::treated_averages(cf));
        }
      }
      auto out = open_out(att_out);
      cfsurv::write_curve(curve, out);
      if (!att_svg.empty()) {
        auto svg = open_out(att_svg);
        cfsurv::write_svg_plot({curve}, {.title = "cumulative treatment effect on the treated"}, svg);
      }
    } else if (*msm) {
      auto panel = load_input(msm_in, msm_schema);
      require_treated(panel);
      cfsurv::PooledLogisticSpec num;
      num.baselines = panel.baseline_names;
      auto den = num;
      den.covariates = panel.covariate_names;
      auto num_fit = cfsurv::fit_pooled_logistic(panel, num);
      auto den_fit = cfsurv::fit_pooled_logistic(panel, den);
      cfsurv::TruncationSpec trunc{msm_lo, msm_hi};
      auto weights = cfsurv::stabilized_weights(panel, num_fit, den_fit, nullptr,
                                                nullptr, trunc);
      cfsurv::Formula formula;
      formula.baselines = panel.baseline_names;
      auto fit = cfsurv::msm_additive(panel, weights, formula);
      auto curve = cfsurv::coefficient_curve(fit, "treat", panel.t_max, "msm");
      auto out = open_out(msm_out);
      cfsurv::write_curve(curve, out);
      if (!msm_weights_out.empty()) {
        auto wout = open_out(msm_weights_out);
        cfsurv::write_weights(panel, weights, wout);
      }
      std::cerr << "msm: mean weight=" << weights.mean_combined(panel)
                << " max=" << weights.max_combined()
                << " truncated=" << weights.truncated_count << "\n";
      if (!msm_svg.empty()) {
        auto svg = open_out(msm_svg);
        cfsurv::write_svg_plot({curve}, {.title = "marginal structural additive model"}, svg);
      }
    } else if (*cox) {
      auto panel = load_input(cox_in, cox_schema);
      auto formula = cox_treat_only ? cfsurv::Formula::treatment_only()
                                    : cfsurv::Formula::full(panel);
      auto fit = cfsurv::fit_cox(panel, formula);
      std::ostream* os = &std::cout;
      std::ofstream file;
      if (!cox_out.empty()) { file = open_out(cox_out); os = &file; }
      os->precision(17);
      *os << "coefficient,estimate,hazard_ratio,se\n";
      for (std::size_t j = 0; j < fit.coef_names.size(); ++j)
        *os << fit.coef_names[j] << ',' << fit.coef(static_cast<Eigen::Index>(j))
            << ',' << fit.hazard_ratios(static_cast<Eigen::Index>(j)) << ','
            << fit.std_errors(static_cast<Eigen::Index>(j)) << '\n';
      // The proportional-hazards coefficient averages a time-varying effect;
      // treat the hazard ratios as summary quantities.
    } else if (*bench) {
      cfsurv::StudyConfig cfg;
      cfg.replicates = bench_reps;
      cfg.n = bench_n;
      cfg.master_seed = bench_seed;
      cfg.parallel = !bench_serial;
      auto result = cfsurv::replicate_study(cfg);
      std::filesystem::create_directories(bench_dir);
      auto table = open_out(bench_dir + "/cox_table.csv");
      result.write_cox_table(table);
      auto curves = open_out(bench_dir + "/mean_curves.csv");
      result.write_mean_curves(curves);
      for (const auto& s : result.regimes) {
        std::vector<cfsurv::CumulativeCurve> overlay;
        for (const auto& [a, c] : s.mean_curves) overlay.push_back(c);
        auto svg = open_out(bench_dir + "/regime_" +
                            cfsurv::regime_name(s.regime) + ".svg");
        cfsurv::write_svg_plot(
            overlay,
            {.title = "mean cumulative treatment curves, regime " +
                      cfsurv::regime_name(s.regime)},
            svg);
        if (s.failures > 0)
          std::cerr << "benchmark: regime " << cfsurv::regime_name(s.regime)
                    << ": " << s.failures << " replicate failures\n";
      }
    } else if (*rep) {
      auto panel = load_input(rep_in, rep_schema);
      require_treated(panel);
      auto cf = cfsurv::impute_counterfactual(panel);
      auto att_curve = cfsurv::att_shortcut(cfsurv::build_manipulated_panel(cf),
                                            cfsurv::Formula::full(panel));
      att_curve.label = "treatment effect on the treated";
      cfsurv::PooledLogisticSpec num;
      num.baselines = panel.baseline_names;
      auto den = num;
      den.covariates = panel.covariate_names;
      auto weights = cfsurv::stabilized_weights(
          panel, cfsurv::fit_pooled_logistic(panel, num),
          cfsurv::fit_pooled_logistic(panel, den));
      cfsurv::Formula msm_formula;
      msm_formula.baselines = panel.baseline_names;
      auto msm_curve = cfsurv::coefficient_curve(
          cfsurv::msm_additive(panel, weights, msm_formula), "treat",
          panel.t_max, "marginal structural model");
      auto svg = open_out(rep_svg);
      cfsurv::write_svg_plot({att_curve, msm_curve},
                             {.title = "ATT vs ATE cumulative treatment effect"}, svg);
      if (!rep_csv.empty()) {
        auto out = open_out(rep_csv);
        out << "estimator,t,estimate,se\n";
        out.precision(17);
        for (const auto* c : {&att_curve, &msm_curve})
          for (int t = 0; t <= c->t_max(); ++t)
            out << c->label << ',' << t << ',' << c->values[static_cast<std::size_t>(t)]
                << ',' << std::sqrt(std::max(0.0, c->variance[static_cast<std::size_t>(t)]))
                << '\n';
      }
    } else if (*cal) {
      double treated = 0, events = 0, clamp = 0, hr = 0;
      int hr_count = 0;
      for (int r = 0; r < cal_reps; ++r) {
        auto cfg = cfsurv::RegimeConfig::defaults(
            cfsurv::parse_regime(cal_regime), cal_n,
            cfsurv::mix_seed(cal_seed, static_cast<std::uint64_t>(r)));
        auto cohort = cfsurv::generate_cohort(cfg);
        treated += static_cast<double>(cohort.observed.n_treated()) / cal_n;
        events += static_cast<double>(cohort.observed.n_events()) / cal_n;
        clamp += cohort.clamp_rate();
        try {
          auto full = cfsurv::build_full_counterfactual(cohort);
          hr += cfsurv::fit_cox(full, cfsurv::Formula::treatment_only()).hr("treat");
          ++hr_count;
        } catch (const std::exception&) {
        }
      }
      std::cout << "regime=" << cal_regime << " reps=" << cal_reps
                << " treated_frac=" << treated / cal_reps
                << " event_frac=" << events / cal_reps
                << " clamp_rate=" << clamp / cal_reps
                << " simulated_att_hr=" << (hr_count ? hr / hr_count : 0.0) << "\n";
    }
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const cfsurv::PanelError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: model: " << e.what() << "\n";
    return kExitModel;
  }
  return 0;
}
