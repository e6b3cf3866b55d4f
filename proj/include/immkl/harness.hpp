#pragma once

// Monte Carlo comparison of filter variants on the coordinated-turn scenario.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "immkl/imm.hpp"
#include "immkl/jmls.hpp"

namespace immkl {

struct SteadyWindow {
  int first = 1;  // 1-based, inclusive
  int last = 1;
};

struct ExperimentConfig {
  TruthConfig truth = TruthConfig::defaults();
  std::vector<FilterConfig> filters;
  int n_runs = 1000;
  std::uint64_t base_seed = 1;
  std::vector<double> r_sweep;
  std::optional<SteadyWindow> steady_window;  // default: final half of the horizon
  Vector initial_cov_diag;                    // filter P0; default (100, 10, 100, 10)
  int threads = 0;                            // 0: hardware concurrency

  // Scenario experiment with KL, MM and KNOWN_R filters.
  static ExperimentConfig defaults();

  SteadyWindow window() const;
  void validate() const;
};

// At step k: sqrt(mean over runs of |p_hat - p|^2) with p = (x[0], x[2]).
std::vector<double> rmse_position(const std::vector<std::vector<Vector>>& estimates,
                                  const std::vector<std::vector<Vector>>& truths);

// At step k: sqrt(mean over runs of |R_hat - R|_F^2) / |R|_F.
std::vector<double> cov_error(const std::vector<std::vector<Matrix>>& estimates, const Matrix& R_true);

struct VariantMetrics {
  Variant variant = Variant::KL;
  std::vector<double> rmse_pos;
  std::vector<double> cov_err;
};

struct RunTrace {
  std::uint64_t measurement_hash = 0;
  std::vector<Vector> states;
  std::vector<Matrix> R_estimates;
};

struct RunRecord {
  bool diverged = false;
  std::vector<Vector> truth;
  std::vector<RunTrace> traces;  // one per filter, in config order
};

struct MonteCarloResult {
  std::vector<VariantMetrics> metrics;
  int runs_used = 0;
  int runs_excluded = 0;
  std::vector<RunRecord> runs;  // retained only when requested
};

// Runs one realization with seed base_seed + run_index through every filter.
RunRecord simulate_run(const ExperimentConfig& cfg, int run_index);

MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg, bool keep_runs = false);

// Mean of the metric over the 1-based inclusive window.
double window_average(const std::vector<double>& series, SteadyWindow w);

struct SweepRow {
  double r = 0.0;
  Variant variant = Variant::KL;
  double avg_rmse_pos = 0.0;
  double avg_cov_err = 0.0;
  int runs_excluded = 0;
};

std::vector<SweepRow> sweep_noise_levels(const ExperimentConfig& cfg);

// Shortest round-trip decimal form.
std::string format_double(double x);

// Header `step,variant,rmse_pos,cov_err`, LF endings.
void write_metrics_csv(std::ostream& os, const MonteCarloResult& result);
// Header `r,variant,avg_rmse_pos,avg_cov_err`, LF endings.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

std::uint64_t hash_measurements(const std::vector<Vector>& zs);

}  // namespace immkl
