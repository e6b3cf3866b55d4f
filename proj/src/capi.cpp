#include "immkl/immkl.h"

#include <fstream>
#include <string>
#include <vector>

#include "immkl/config.hpp"
#include "immkl/harness.hpp"
#include "immkl/imm.hpp"
#include "immkl/self_check.hpp"

struct immkl_config {
  immkl::ConfigTable table;
  immkl::ExperimentConfig experiment;
};

struct immkl_metrics {
  immkl::MonteCarloResult result;
  immkl::SteadyWindow window;
};

struct immkl_sweep {
  std::vector<immkl::SweepRow> rows;
};

struct immkl_filter {
  immkl::JumpMarkovModel model;
  immkl::FilterConfig config;
  immkl::ModeBank bank;
};

namespace {

thread_local std::string last_error;

immkl_status fail(immkl_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

immkl_status status_for(immkl::ErrorKind kind) {
  switch (kind) {
    case immkl::ErrorKind::Config: return IMMKL_ERR_CONFIG;
    case immkl::ErrorKind::Io: return IMMKL_ERR_IO;
    default: return IMMKL_ERR_NUMERIC;
  }
}

// Runs body, translating exceptions into status codes.
template <typename F>
immkl_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const immkl::Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(IMMKL_ERR_NUMERIC, e.what());
  } catch (...) {
    return fail(IMMKL_ERR_NUMERIC, "unknown failure");
  }
}

template <typename Write>
immkl_status write_file(const char* path, Write&& write) {
  if (!path) return fail(IMMKL_ERR_ARGUMENT, "null path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return fail(IMMKL_ERR_IO, std::string("cannot open '") + path + "' for writing");
  write(out);
  out.flush();
  if (!out) return fail(IMMKL_ERR_IO, std::string("write to '") + path + "' failed");
  return IMMKL_OK;
}

}  // namespace

extern "C" {

const char* immkl_version(void) { return "1.0.0"; }

const char* immkl_last_error(void) { return last_error.c_str(); }

immkl_status immkl_config_load(const char* path, const char* const* overrides, size_t n_overrides,
                               immkl_config** out) {
  if (!out || (n_overrides > 0 && !overrides)) return fail(IMMKL_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> ovs;
    for (size_t i = 0; i < n_overrides; ++i) {
      if (!overrides[i]) return fail(IMMKL_ERR_ARGUMENT, "null override");
      ovs.emplace_back(overrides[i]);
    }
    auto table = immkl::effective_config_table(path ? path : "", ovs);
    auto experiment = immkl::to_experiment(table);
    *out = new immkl_config{std::move(table), std::move(experiment)};
    return IMMKL_OK;
  });
}

void immkl_config_free(immkl_config* cfg) { delete cfg; }

immkl_status immkl_config_write(const immkl_config* cfg, const char* path) {
  if (!cfg) return fail(IMMKL_ERR_ARGUMENT, "null config");
  return guarded([&] { return write_file(path, [&](std::ostream& os) { os << immkl::render_config(cfg->table); }); });
}

int immkl_config_runs(const immkl_config* cfg) { return cfg ? cfg->experiment.n_runs : 0; }

int immkl_config_horizon(const immkl_config* cfg) { return cfg ? cfg->experiment.truth.horizon : 0; }

size_t immkl_config_variant_count(const immkl_config* cfg) { return cfg ? cfg->experiment.filters.size() : 0; }

immkl_status immkl_run(const immkl_config* cfg, immkl_metrics** out) {
  if (!cfg || !out) return fail(IMMKL_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto result = immkl::run_monte_carlo(cfg->experiment);
    *out = new immkl_metrics{std::move(result), cfg->experiment.window()};
    return IMMKL_OK;
  });
}

void immkl_metrics_free(immkl_metrics* m) { delete m; }

size_t immkl_metrics_variant_count(const immkl_metrics* m) { return m ? m->result.metrics.size() : 0; }

size_t immkl_metrics_horizon(const immkl_metrics* m) {
  return m && !m->result.metrics.empty() ? m->result.metrics.front().rmse_pos.size() : 0;
}

int immkl_metrics_runs_used(const immkl_metrics* m) { return m ? m->result.runs_used : 0; }

int immkl_metrics_runs_excluded(const immkl_metrics* m) { return m ? m->result.runs_excluded : 0; }

const char* immkl_metrics_variant_name(const immkl_metrics* m, size_t variant) {
  if (!m || variant >= m->result.metrics.size()) return nullptr;
  return immkl::to_string(m->result.metrics[variant].variant).data();
}

immkl_status immkl_metrics_series(const immkl_metrics* m, size_t variant, double* rmse_pos, double* cov_err) {
  if (!m || variant >= m->result.metrics.size()) return fail(IMMKL_ERR_ARGUMENT, "bad metrics handle or index");
  const auto& vm = m->result.metrics[variant];
  if (rmse_pos) std::copy(vm.rmse_pos.begin(), vm.rmse_pos.end(), rmse_pos);
  if (cov_err) std::copy(vm.cov_err.begin(), vm.cov_err.end(), cov_err);
  return IMMKL_OK;
}

immkl_status immkl_metrics_steady_average(const immkl_metrics* m, size_t variant, double* rmse_pos,
                                          double* cov_err) {
  if (!m || variant >= m->result.metrics.size()) return fail(IMMKL_ERR_ARGUMENT, "bad metrics handle or index");
  return guarded([&] {
    const auto& vm = m->result.metrics[variant];
    if (rmse_pos) *rmse_pos = immkl::window_average(vm.rmse_pos, m->window);
    if (cov_err) *cov_err = immkl::window_average(vm.cov_err, m->window);
    return IMMKL_OK;
  });
}

immkl_status immkl_metrics_write_csv(const immkl_metrics* m, const char* path) {
  if (!m) return fail(IMMKL_ERR_ARGUMENT, "null metrics");
  return guarded([&] { return write_file(path, [&](std::ostream& os) { immkl::write_metrics_csv(os, m->result); }); });
}

immkl_status immkl_sweep_run(const immkl_config* cfg, immkl_sweep** out) {
  if (!cfg || !out) return fail(IMMKL_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new immkl_sweep{immkl::sweep_noise_levels(cfg->experiment)};
    return IMMKL_OK;
  });
}

void immkl_sweep_free(immkl_sweep* s) { delete s; }

size_t immkl_sweep_row_count(const immkl_sweep* s) { return s ? s->rows.size() : 0; }

immkl_status immkl_sweep_row(const immkl_sweep* s, size_t row, double* r, const char** variant,
                             double* avg_rmse_pos, double* avg_cov_err) {
  if (!s || row >= s->rows.size()) return fail(IMMKL_ERR_ARGUMENT, "bad sweep handle or row");
  const auto& x = s->rows[row];
  if (r) *r = x.r;
  if (variant) *variant = immkl::to_string(x.variant).data();
  if (avg_rmse_pos) *avg_rmse_pos = x.avg_rmse_pos;
  if (avg_cov_err) *avg_cov_err = x.avg_cov_err;
  return IMMKL_OK;
}

immkl_status immkl_sweep_write_csv(const immkl_sweep* s, const char* path) {
  if (!s) return fail(IMMKL_ERR_ARGUMENT, "null sweep");
  return guarded([&] { return write_file(path, [&](std::ostream& os) { immkl::write_sweep_csv(os, s->rows); }); });
}

immkl_status immkl_validate(immkl_check_callback cb, void* user, int* n_failed) {
  return guarded([&] {
    int failed = 0;
    for (const auto& check : immkl::run_self_checks()) {
      if (!check.passed) ++failed;
      if (cb) cb(check.name.c_str(), check.passed ? 1 : 0, check.detail.c_str(), user);
    }
    if (n_failed) *n_failed = failed;
    return failed == 0 ? IMMKL_OK : fail(IMMKL_ERR_NUMERIC, std::to_string(failed) + " self-check(s) failed");
  });
}

immkl_status immkl_filter_create(const immkl_config* cfg, const char* variant, const double* x0,
                                 immkl_filter** out) {
  if (!cfg || !variant || !x0 || !out) return fail(IMMKL_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto v = immkl::parse_variant(variant);
    if (!v) return fail(IMMKL_ERR_ARGUMENT, std::string("unknown variant '") + variant + "'");
    const auto& exp = cfg->experiment;
    auto model = immkl::build_ct_scenario(exp.truth);
    immkl::FilterConfig fc = immkl::FilterConfig::defaults(*v);
    for (const auto& f : exp.filters) {
      if (f.variant == *v) fc = f;
    }
    if (*v == immkl::Variant::KnownR && !fc.known_R) fc.known_R = immkl::true_measurement_cov(exp.truth.r);
    const auto n = model.state_dim();
    const immkl::GaussianEstimate init{Eigen::Map<const immkl::Vector>(x0, n),
                                       immkl::Matrix(exp.initial_cov_diag.asDiagonal())};
    auto bank = immkl::initial_bank(fc, model.n_modes(), model.meas_dim(), init);
    *out = new immkl_filter{std::move(model), std::move(fc), std::move(bank)};
    return IMMKL_OK;
  });
}

void immkl_filter_free(immkl_filter* f) { delete f; }

size_t immkl_filter_state_dim(const immkl_filter* f) { return f ? static_cast<size_t>(f->model.state_dim()) : 0; }

size_t immkl_filter_meas_dim(const immkl_filter* f) { return f ? static_cast<size_t>(f->model.meas_dim()) : 0; }

size_t immkl_filter_mode_count(const immkl_filter* f) { return f ? static_cast<size_t>(f->model.n_modes()) : 0; }

immkl_status immkl_filter_step(immkl_filter* f, const double* z, double* state, double* cov, double* r_hat,
                               double* mode_probs) {
  if (!f || !z) return fail(IMMKL_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const immkl::Vector zv = Eigen::Map<const immkl::Vector>(z, f->model.meas_dim());
    auto step = immkl::imm_step(f->bank, f->model, zv, f->config);
    const auto& o = step.output;
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (state) Eigen::Map<immkl::Vector>(state, o.fused_state.mean.size()) = o.fused_state.mean;
    if (cov) Eigen::Map<RowMajor>(cov, o.fused_state.cov.rows(), o.fused_state.cov.cols()) = o.fused_state.cov;
    if (r_hat && o.fused_R.size() > 0) Eigen::Map<RowMajor>(r_hat, o.fused_R.rows(), o.fused_R.cols()) = o.fused_R;
    if (mode_probs) Eigen::Map<immkl::Vector>(mode_probs, o.mode_probs.size()) = o.mode_probs;
    f->bank = std::move(step.bank);
    return IMMKL_OK;
  });
}

}  // extern "C"
