#ifndef PERCLOSS_PERCLOSS_H
#define PERCLOSS_PERCLOSS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PERCLOSS_BUILDING)
#    define PL_API __declspec(dllexport)
#  else
#    define PL_API __declspec(dllimport)
#  endif
#else
#  define PL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pl_status {
  PL_OK = 0,
  PL_ERR_INVALID_ARGUMENT = 1,
  PL_ERR_FORMAT = 2,
  PL_ERR_IO = 3,
  PL_ERR_NUMERIC = 4,
  PL_ERR_CHECK_FAILED = 5,
  PL_ERR_INTERNAL = 6
} pl_status;

typedef enum pl_loss {
  PL_LOSS_SDR = 0,
  PL_LOSS_PESQ = 1,
  PL_LOSS_STOI = 2,
  PL_LOSS_SDR_PESQ = 3,
  PL_LOSS_SDR_STOI = 4,
  PL_LOSS_SDR_PESQ_STOI = 5
} pl_loss;

typedef struct pl_context pl_context;
typedef struct pl_signal pl_signal;
typedef struct pl_experiment pl_experiment;

typedef struct pl_weights {
  double alpha; /* PESQ weight */
  double beta;  /* STOI weight */
} pl_weights;

typedef struct pl_score_report {
  double si_sdr_db;
  int si_sdr_clamped;
  double pesq_loss;
  double d_sym;
  double d_asym;
  double stoi_loss;
  double sdr_pesq;
  double sdr_stoi;
  double sdr_pesq_stoi;
} pl_score_report;

typedef struct pl_gradcheck_report {
  double max_rel_error;
  size_t worst_index;
  double analytic;
  double numeric;
  size_t coordinates;
} pl_gradcheck_report;

typedef struct pl_experiment_config {
  const double* snrs;
  size_t snr_count;
  pl_weights weights;
  size_t steps;
  double step_size;
  uint64_t seed;
  const char* noise; /* "white", "pink" or "babble" */
  double duration_s; /* 0: drawn from the seed */
} pl_experiment_config;

PL_API const char* pl_version(void);
PL_API const char* pl_status_string(pl_status status);

/* PESQ tables come from tables_path, else $PERCLOSS_PESQ_TABLES, else the
   built-in copy. */
PL_API pl_status pl_context_create(const char* tables_path, pl_context** out);
PL_API void pl_context_destroy(pl_context* ctx);
PL_API const char* pl_last_error(const pl_context* ctx);
PL_API const char* pl_tables_revision(const pl_context* ctx);
PL_API size_t pl_warning_count(const pl_context* ctx);
PL_API const char* pl_warning(const pl_context* ctx, size_t index);
PL_API void pl_clear_warnings(pl_context* ctx);

PL_API pl_status pl_signal_create(pl_context* ctx, const double* samples,
                                  size_t length, pl_signal** out);
PL_API pl_status pl_signal_load_wav(pl_context* ctx, const char* path,
                                    pl_signal** out);
/* Float-32 WAV; samples beyond [-1, 1] are kept and noted as a warning. */
PL_API pl_status pl_signal_save_wav(pl_context* ctx, const pl_signal* signal,
                                    const char* path);
PL_API size_t pl_signal_length(const pl_signal* signal);
PL_API const double* pl_signal_data(const pl_signal* signal);
PL_API pl_status pl_signal_truncate(pl_context* ctx, pl_signal* signal,
                                    size_t length);
PL_API void pl_signal_destroy(pl_signal* signal);

PL_API pl_status pl_mix_at_snr(pl_context* ctx, const pl_signal* clean,
                               const pl_signal* noise, double snr_db,
                               pl_signal** out, double* noise_gain);

PL_API pl_status pl_score(pl_context* ctx, const pl_signal* clean,
                          const pl_signal* estimate, pl_weights weights,
                          pl_score_report* out);

PL_API pl_status pl_loss_from_name(const char* name, pl_loss* out);
PL_API const char* pl_loss_name(pl_loss loss);

/* Objective value and its gradient with respect to the estimate. `gradient`
   must hold pl_signal_length(estimate) doubles, or be NULL for the value
   only. */
PL_API pl_status pl_gradient(pl_context* ctx, pl_loss loss, pl_weights weights,
                             const pl_signal* clean, const pl_signal* estimate,
                             double* value, double* gradient, size_t length);

/* Finite-difference check on a seeded synthetic pair. */
PL_API pl_status pl_gradcheck(pl_context* ctx, pl_loss loss, pl_weights weights,
                              uint64_t seed, size_t coordinates, double step,
                              pl_gradcheck_report* out);

PL_API void pl_experiment_config_default(pl_experiment_config* config);
PL_API pl_status pl_experiment_run(pl_context* ctx,
                                   const pl_experiment_config* config,
                                   pl_experiment** out);
PL_API const char* pl_experiment_csv(const pl_experiment* experiment);
PL_API const char* pl_experiment_json(const pl_experiment* experiment);
PL_API int pl_experiment_trends_passed(const pl_experiment* experiment);
PL_API void pl_experiment_destroy(pl_experiment* experiment);

#ifdef __cplusplus
}
#endif

#endif
