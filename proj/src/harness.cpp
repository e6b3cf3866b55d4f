#include "immkl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>
#include <thread>

namespace immkl {

namespace {

void require_config(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Config, what);
}

bool is_pd(const Matrix& m) { return m.allFinite() && Eigen::LLT<Matrix>(m).info() == Eigen::Success; }

FilterConfig resolved_filter(const FilterConfig& f, const TruthConfig& truth) {
  FilterConfig out = f;
  if (out.variant == Variant::KnownR && !out.known_R) out.known_R = true_measurement_cov(truth.r);
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  cfg.filters = {FilterConfig::defaults(Variant::KL), FilterConfig::defaults(Variant::MM),
                 FilterConfig::defaults(Variant::KnownR)};
  cfg.r_sweep = {50.0, 100.0, 200.0, 400.0};
  cfg.initial_cov_diag = Vector(4);
  cfg.initial_cov_diag << 100.0, 10.0, 100.0, 10.0;
  return cfg;
}

SteadyWindow ExperimentConfig::window() const {
  if (steady_window) return *steady_window;
  return {truth.horizon / 2 + 1, truth.horizon};
}

void ExperimentConfig::validate() const {
  truth.validate();
  require_config(n_runs >= 1, "experiment.n_runs: must be >= 1");
  require_config(!filters.empty(), "filters.variants: at least one filter variant is required");
  for (double r : r_sweep) require_config(r > 0.0, "experiment.r_sweep: values must be > 0");
  require_config(initial_cov_diag.size() == truth.x0.size() && (initial_cov_diag.array() > 0.0).all(),
                 "filters.p0_diag: need one positive entry per state component");
  const auto w = window();
  require_config(w.first >= 1 && w.first <= w.last && w.last <= truth.horizon,
                 "experiment.steady_first/steady_last: window must lie within [1, horizon]");
  require_config(threads >= 0, "experiment.threads: must be >= 0");
  const auto model = build_ct_scenario(truth);
  for (const auto& f : filters) resolved_filter(f, truth).validate(model.n_modes(), model.meas_dim());
}

std::vector<double> rmse_position(const std::vector<std::vector<Vector>>& estimates,
                                  const std::vector<std::vector<Vector>>& truths) {
  if (estimates.size() != truths.size() || estimates.empty()) {
    throw Error(ErrorKind::DimensionMismatch, "rmse_position: run counts differ or are zero");
  }
  const std::size_t horizon = truths.front().size();
  std::vector<double> sum(horizon, 0.0);
  for (std::size_t run = 0; run < truths.size(); ++run) {
    if (estimates[run].size() != horizon || truths[run].size() != horizon) {
      throw Error(ErrorKind::DimensionMismatch, "rmse_position: horizons differ");
    }
    for (std::size_t k = 0; k < horizon; ++k) {
      const double dx = estimates[run][k](0) - truths[run][k](0);
      const double dy = estimates[run][k](2) - truths[run][k](2);
      sum[k] += dx * dx + dy * dy;
    }
  }
  for (double& s : sum) s = std::sqrt(s / static_cast<double>(truths.size()));
  return sum;
}

std::vector<double> cov_error(const std::vector<std::vector<Matrix>>& estimates, const Matrix& R_true) {
  if (estimates.empty()) throw Error(ErrorKind::DimensionMismatch, "cov_error: no runs");
  const std::size_t horizon = estimates.front().size();
  const double norm = R_true.norm();
  std::vector<double> sum(horizon, 0.0);
  for (const auto& run : estimates) {
    if (run.size() != horizon) throw Error(ErrorKind::DimensionMismatch, "cov_error: horizons differ");
    for (std::size_t k = 0; k < horizon; ++k) {
      if (run[k].rows() != R_true.rows() || run[k].cols() != R_true.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "cov_error: matrix dimensions differ");
      }
      sum[k] += (run[k] - R_true).squaredNorm();
    }
  }
  for (double& s : sum) s = std::sqrt(s / static_cast<double>(estimates.size())) / norm;
  return sum;
}

std::uint64_t hash_measurements(const std::vector<Vector>& zs) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& z : zs) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      unsigned char bytes[sizeof(double)];
      const double v = z(i);
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

RunRecord simulate_run(const ExperimentConfig& cfg, int run_index) {
  const JumpMarkovModel model = build_ct_scenario(cfg.truth);
  Rng rng(cfg.base_seed + static_cast<std::uint64_t>(run_index));
  const Trajectory truth = simulate_truth(model, cfg.truth, rng);
  const Matrix P0 = cfg.initial_cov_diag.asDiagonal();
  const GaussianEstimate initial{sample_gaussian(cfg.truth.x0, P0, rng), P0};

  RunRecord rec;
  rec.truth = truth.states;
  for (const auto& f : cfg.filters) {
    const FilterConfig fc = resolved_filter(f, cfg.truth);
    RunTrace trace;
    trace.measurement_hash = hash_measurements(truth.measurements);
    try {
      ModeBank bank = initial_bank(fc, model.n_modes(), model.meas_dim(), initial);
      for (const Vector& z : truth.measurements) {
        auto step = imm_step(bank, model, z, fc);
        const auto& out = step.output;
        if (!is_pd(out.fused_state.cov) || !out.fused_state.mean.allFinite() || !is_pd(out.fused_R)) {
          rec.diverged = true;
        }
        trace.states.push_back(out.fused_state.mean);
        trace.R_estimates.push_back(out.fused_R);
        bank = std::move(step.bank);
        if (rec.diverged) break;
      }
    } catch (const Error&) {
      rec.diverged = true;
    }
    rec.traces.push_back(std::move(trace));
    if (rec.diverged) break;
  }
  return rec;
}

MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg, bool keep_runs) {
  cfg.validate();
  std::vector<RunRecord> records(static_cast<std::size_t>(cfg.n_runs));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int i = next++; i < cfg.n_runs; i = next++) records[static_cast<std::size_t>(i)] = simulate_run(cfg, i);
  };
  const int n_threads = std::clamp(cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency()),
                                   1, cfg.n_runs);
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }

  MonteCarloResult result;
  std::vector<std::vector<Vector>> truths;
  std::vector<std::vector<std::vector<Vector>>> states(cfg.filters.size());
  std::vector<std::vector<std::vector<Matrix>>> rs(cfg.filters.size());
  for (const auto& rec : records) {
    if (rec.diverged) {
      ++result.runs_excluded;
      continue;
    }
    truths.push_back(rec.truth);
    for (std::size_t f = 0; f < cfg.filters.size(); ++f) {
      states[f].push_back(rec.traces[f].states);
      rs[f].push_back(rec.traces[f].R_estimates);
    }
  }
  result.runs_used = static_cast<int>(truths.size());
  if (result.runs_used == 0) throw Error(ErrorKind::Underflow, "every Monte Carlo run diverged");

  const Matrix R_true = true_measurement_cov(cfg.truth.r);
  for (std::size_t f = 0; f < cfg.filters.size(); ++f) {
    result.metrics.push_back({cfg.filters[f].variant, rmse_position(states[f], truths), cov_error(rs[f], R_true)});
  }
  for (const auto& m : result.metrics) {
    for (std::size_t k = 0; k < m.rmse_pos.size(); ++k) {
      if (!std::isfinite(m.rmse_pos[k]) || !std::isfinite(m.cov_err[k])) {
        throw Error(ErrorKind::Underflow, "non-finite metric after excluding divergent runs");
      }
    }
  }
  if (keep_runs) result.runs = std::move(records);
  return result;
}

double window_average(const std::vector<double>& series, SteadyWindow w) {
  if (w.first < 1 || w.last < w.first || w.last > static_cast<int>(series.size())) {
    throw Error(ErrorKind::InvalidParameter, "averaging window outside the series");
  }
  double s = 0.0;
  for (int k = w.first; k <= w.last; ++k) s += series[static_cast<std::size_t>(k - 1)];
  return s / (w.last - w.first + 1);
}

std::vector<SweepRow> sweep_noise_levels(const ExperimentConfig& cfg) {
  require_config(!cfg.r_sweep.empty(), "experiment.r_sweep: sweep needs at least one r value");
  std::vector<SweepRow> rows;
  for (double r : cfg.r_sweep) {
    ExperimentConfig at = cfg;
    at.truth.r = r;
    const auto result = run_monte_carlo(at);
    const SteadyWindow all{1, at.truth.horizon};
    for (const auto& m : result.metrics) {
      rows.push_back({r, m.variant, window_average(m.rmse_pos, all), window_average(m.cov_err, all),
                      result.runs_excluded});
    }
  }
  return rows;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& os, const MonteCarloResult& result) {
  os << "step,variant,rmse_pos,cov_err\n";
  if (result.metrics.empty()) return;
  const std::size_t horizon = result.metrics.front().rmse_pos.size();
  for (std::size_t k = 0; k < horizon; ++k) {
    for (const auto& m : result.metrics) {
      os << (k + 1) << ',' << to_string(m.variant) << ',' << format_double(m.rmse_pos[k]) << ','
         << format_double(m.cov_err[k]) << '\n';
    }
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "r,variant,avg_rmse_pos,avg_cov_err\n";
  for (const auto& row : rows) {
    os << format_double(row.r) << ',' << to_string(row.variant) << ',' << format_double(row.avg_rmse_pos) << ','
       << format_double(row.avg_cov_err) << '\n';
  }
}

}  // namespace immkl
