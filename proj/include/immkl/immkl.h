#ifndef IMMKL_H
#define IMMKL_H

/*
 * C interface to the IMM random-matrix filtering library.
 *
 * All objects are opaque handles created by a *_load / *_create / run call
 * and released by the matching *_free. Functions return an immkl_status;
 * on failure immkl_last_error() describes the problem (per thread).
 * Status values double as the command-line exit codes.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(IMMKL_BUILDING)
#    define IMMKL_API __declspec(dllexport)
#  else
#    define IMMKL_API __declspec(dllimport)
#  endif
#else
#  define IMMKL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum immkl_status {
  IMMKL_OK = 0,
  IMMKL_ERR_ARGUMENT = 1, /* bad handle, null pointer, index out of range */
  IMMKL_ERR_CONFIG = 2,
  IMMKL_ERR_NUMERIC = 3,  /* runtime or numerical failure */
  IMMKL_ERR_IO = 4
} immkl_status;

typedef struct immkl_config immkl_config;
typedef struct immkl_metrics immkl_metrics;
typedef struct immkl_sweep immkl_sweep;
typedef struct immkl_filter immkl_filter;

IMMKL_API const char* immkl_version(void);

/* Message for the most recent failure on the calling thread ("" if none). */
IMMKL_API const char* immkl_last_error(void);

/* ---- configuration ---------------------------------------------------- */

/* path may be NULL or "" for the compiled-in defaults. Each override has the
 * form "section.key=value" and is applied after the file. */
IMMKL_API immkl_status immkl_config_load(const char* path, const char* const* overrides, size_t n_overrides,
                                         immkl_config** out);
IMMKL_API void immkl_config_free(immkl_config* cfg);

/* Writes the effective configuration; loading it reproduces the experiment. */
IMMKL_API immkl_status immkl_config_write(const immkl_config* cfg, const char* path);

IMMKL_API int immkl_config_runs(const immkl_config* cfg);
IMMKL_API int immkl_config_horizon(const immkl_config* cfg);
IMMKL_API size_t immkl_config_variant_count(const immkl_config* cfg);

/* ---- Monte Carlo runs ------------------------------------------------- */

IMMKL_API immkl_status immkl_run(const immkl_config* cfg, immkl_metrics** out);
IMMKL_API void immkl_metrics_free(immkl_metrics* m);

IMMKL_API size_t immkl_metrics_variant_count(const immkl_metrics* m);
IMMKL_API size_t immkl_metrics_horizon(const immkl_metrics* m);
IMMKL_API int immkl_metrics_runs_used(const immkl_metrics* m);
IMMKL_API int immkl_metrics_runs_excluded(const immkl_metrics* m);
/* "KL", "MM" or "KNOWN_R"; NULL when the index is out of range. */
IMMKL_API const char* immkl_metrics_variant_name(const immkl_metrics* m, size_t variant);
/* Copies horizon values into each non-NULL array. */
IMMKL_API immkl_status immkl_metrics_series(const immkl_metrics* m, size_t variant, double* rmse_pos,
                                            double* cov_err);
/* Averages over the configured steady-state window. */
IMMKL_API immkl_status immkl_metrics_steady_average(const immkl_metrics* m, size_t variant, double* rmse_pos,
                                                    double* cov_err);
IMMKL_API immkl_status immkl_metrics_write_csv(const immkl_metrics* m, const char* path);

/* ---- noise-level sweeps ----------------------------------------------- */

IMMKL_API immkl_status immkl_sweep_run(const immkl_config* cfg, immkl_sweep** out);
IMMKL_API void immkl_sweep_free(immkl_sweep* s);
IMMKL_API size_t immkl_sweep_row_count(const immkl_sweep* s);
IMMKL_API immkl_status immkl_sweep_row(const immkl_sweep* s, size_t row, double* r, const char** variant,
                                       double* avg_rmse_pos, double* avg_cov_err);
IMMKL_API immkl_status immkl_sweep_write_csv(const immkl_sweep* s, const char* path);

/* ---- self-checks ------------------------------------------------------ */

typedef void (*immkl_check_callback)(const char* name, int passed, const char* detail, void* user);

/* Runs the built-in checks, reporting each through cb (may be NULL).
 * Returns IMMKL_ERR_NUMERIC if any check fails. */
IMMKL_API immkl_status immkl_validate(immkl_check_callback cb, void* user, int* n_failed);

/* ---- streaming filter ------------------------------------------------- */

/* Filter on the configured scenario model. variant is "KL", "MM" or
 * "KNOWN_R"; x0 has state_dim entries and the initial covariance is the
 * configured diagonal. */
IMMKL_API immkl_status immkl_filter_create(const immkl_config* cfg, const char* variant, const double* x0,
                                           immkl_filter** out);
IMMKL_API void immkl_filter_free(immkl_filter* f);
IMMKL_API size_t immkl_filter_state_dim(const immkl_filter* f);
IMMKL_API size_t immkl_filter_meas_dim(const immkl_filter* f);
IMMKL_API size_t immkl_filter_mode_count(const immkl_filter* f);

/* One IMM cycle with measurement z (meas_dim values). Outputs may be NULL:
 * state (state_dim), cov (state_dim^2, row-major), r_hat (meas_dim^2,
 * row-major), mode_probs (mode_count). */
IMMKL_API immkl_status immkl_filter_step(immkl_filter* f, const double* z, double* state, double* cov,
                                         double* r_hat, double* mode_probs);

#ifdef __cplusplus
}
#endif

#endif /* IMMKL_H */
