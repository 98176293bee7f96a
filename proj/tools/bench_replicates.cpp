// Timing comparison of the serial reference path against the OpenMP
// replicate loop, with an equality check on the aggregated results.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cfsurv/study.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double run_study(const cfsurv::StudyConfig& cfg, cfsurv::StudyResult* out) {
  auto start = std::chrono::steady_clock::now();
  *out = cfsurv::replicate_study(cfg);
  auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

double max_curve_diff(const cfsurv::StudyResult& a, const cfsurv::StudyResult& b) {
  double diff = 0.0;
  for (std::size_t g = 0; g < a.regimes.size(); ++g)
    for (const auto& [an, curve] : a.regimes[g].mean_curves) {
      const auto& other = b.regimes[g].mean_curves.at(an);
      for (std::size_t t = 0; t < curve.values.size(); ++t)
        diff = std::max(diff, std::abs(curve.values[t] - other.values[t]));
    }
  return diff;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark: serial reference vs OpenMP replicate study"};
  int reps = 20, n = 500;
  std::uint64_t seed = 1;
  app.add_option("--reps", reps)->capture_default_str();
  app.add_option("--n", n)->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  cfsurv::StudyConfig cfg;
  cfg.replicates = reps;
  cfg.n = n;
  cfg.master_seed = seed;

  cfg.parallel = false;
  cfsurv::StudyResult serial;
  double t_serial = run_study(cfg, &serial);

  cfg.parallel = true;
  cfsurv::StudyResult parallel;
  double t_parallel = run_study(cfg, &parallel);

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::cout << "replicates_per_regime=" << reps << " n=" << n
            << " threads=" << threads << "\n";
  std::cout << "serial_seconds=" << t_serial << "\n";
  std::cout << "parallel_seconds=" << t_parallel << "\n";
  std::cout << "speedup=" << (t_parallel > 0 ? t_serial / t_parallel : 0.0) << "\n";
  double diff = max_curve_diff(serial, parallel);
  std::cout << "max_result_difference=" << diff << "\n";
  if (diff != 0.0) {
    std::cerr << "serial and parallel paths disagree\n";
    return 1;
  }
  return 0;
}
