#ifndef LUMPFIT_LUMPFIT_H
#define LUMPFIT_LUMPFIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LF_API __declspec(dllexport)
#else
#define LF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lf_status {
  LF_OK = 0,
  LF_ERR_INVALID_ARGUMENT = 1,
  LF_ERR_DIMENSION_MISMATCH = 2,
  LF_ERR_NON_FINITE_STATE = 3,
  LF_ERR_STEP_LIMIT_EXCEEDED = 4,
  LF_ERR_OUT_OF_RANGE = 5,
  LF_ERR_NON_FINITE_GRADIENT = 6,
  LF_ERR_DIVERGED_FIT = 7,
  LF_ERR_MALFORMED_ROW = 8,
  LF_ERR_NON_MONOTONE_TIME = 9,
  LF_ERR_EMPTY_RUN = 10,
  LF_ERR_SPAN_TOO_SHORT = 11,
  LF_ERR_BAD_SCHEMA = 12,
  LF_ERR_IO = 13,
  LF_ERR_INTERNAL = 99
} lf_status;

/* Opaque handles. Each *_free accepts NULL. */
typedef struct lf_model lf_model;
typedef struct lf_runs lf_runs;
typedef struct lf_config lf_config;
typedef struct lf_protocol lf_protocol;
typedef struct lf_control_result lf_control_result;

typedef struct lf_trial_report {
  int trial;
  double train_loss;
  double test_loss;
  double capacitance;
  double train_rmse;
  double test_rmse;
} lf_trial_report;

typedef struct lf_control_problem {
  double t_set;
  double p_max;
  double horizon;
  double t_init;
  double dt;
} lf_control_problem;

typedef struct lf_control_options {
  int adam_epochs;
  double adam_lr;
  int lbfgs_memory;
  double rel_loss_tol;
  int max_iters;
  int substeps;
  uint64_t seed;
} lf_control_options;

LF_API const char* lf_version(void);

/* Message of the last failure on the calling thread; empty after success. */
LF_API const char* lf_last_error(void);
LF_API const char* lf_status_name(lf_status status);

/* Synthetic data. `spec_path` may be NULL for the built-in ground truth.
   Writes run1.csv .. runN.csv and spec.txt into `out_dir`. */
LF_API lf_status lf_synth_write(const char* spec_path, const char* out_dir, size_t n_runs,
                                uint64_t seed);

/* Runs from a CSV file or a directory of CSV files, resampled to `dt` s. */
LF_API lf_status lf_runs_load(const char* path, double dt, lf_runs** out);
LF_API size_t lf_runs_count(const lf_runs* runs);
LF_API void lf_runs_free(lf_runs* runs);

/* Training configuration, `key = value` file or defaults when path is NULL. */
LF_API lf_status lf_config_load(const char* path, lf_config** out);
LF_API lf_status lf_config_set(lf_config* config, const char* key, double value);
LF_API lf_status lf_config_get(const lf_config* config, const char* key, double* value);
/* Nonzero when the loaded file named a seed. */
LF_API int lf_config_seed_given(const lf_config* config);
LF_API void lf_config_free(lf_config* config);

/* Shuffle-split protocol: `n_trials` fits on `n_train` runs each, the rest held out. */
LF_API lf_status lf_protocol_run(const lf_runs* runs, const lf_config* config, size_t n_trials,
                                 size_t n_train, unsigned jobs, lf_protocol** out);
LF_API size_t lf_protocol_trial_count(const lf_protocol* protocol);
LF_API lf_status lf_protocol_report(const lf_protocol* protocol, size_t index, lf_trial_report* out);
/* Copy of the fitted model of trial `index`; free with lf_model_free. */
LF_API lf_status lf_protocol_model(const lf_protocol* protocol, size_t index, lf_model** out);
LF_API lf_status lf_protocol_write_report(const lf_protocol* protocol, const char* csv_path);
LF_API lf_status lf_protocol_write_history(const lf_protocol* protocol, size_t index,
                                           const char* csv_path);
LF_API void lf_protocol_free(lf_protocol* protocol);

LF_API lf_status lf_model_load(const char* path, lf_model** out);
LF_API lf_status lf_model_save(const lf_model* model, const char* path);
LF_API double lf_model_capacitance(const lf_model* model);
LF_API lf_status lf_model_heat_input(const lf_model* model, double temperature, double power,
                                     double* out);
LF_API void lf_model_free(lf_model* model);

/* Simulates the model under the run's recorded power on a `dt` grid and
   writes `t,measured,predicted`. `loss` (may be NULL) receives the run's
   summed squared error. */
LF_API lf_status lf_predict(const lf_model* model, const char* run_path, double dt, int substeps,
                            const char* out_csv, double* loss);

LF_API lf_status lf_surface_write(const lf_model* model, double t_min, double t_max, double p_min,
                                  double p_max, size_t resolution, const char* out_csv);

LF_API lf_control_problem lf_control_problem_default(void);
LF_API lf_control_options lf_control_options_default(void);
LF_API lf_status lf_control_run(const lf_model* model, const lf_control_problem* problem,
                                const lf_control_options* options, lf_control_result** out);
LF_API size_t lf_control_result_size(const lf_control_result* result);
LF_API double lf_control_result_loss(const lf_control_result* result);
/* Copies the collocation times, powers and temperatures; any pointer may be NULL. */
LF_API lf_status lf_control_result_series(const lf_control_result* result, double* times,
                                          double* power, double* temperature);
/* Writes profile.csv, trajectory.csv and history.csv into `out_dir`. */
LF_API lf_status lf_control_result_write(const lf_control_result* result, const char* out_dir);
LF_API void lf_control_result_free(lf_control_result* result);

/* Collects every report CSV in `reports_dir` into one table written to `out_path`. */
LF_API lf_status lf_report_aggregate(const char* reports_dir, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif
