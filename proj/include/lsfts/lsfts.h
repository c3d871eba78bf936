#ifndef LSFTS_LSFTS_H
#define LSFTS_LSFTS_H

/*
 * C interface to the lsfts library.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every fallible call returns an lsfts_status; on failure the message is
 * available from lsfts_last_error() on the calling thread until the next call.
 * Strings returned through char** are owned by the caller and released with
 * lsfts_string_free().
 *
 * Operators on the K-dimensional Fourier basis are passed as K*K complex
 * entries, column-major, interleaved (re, im): 2*K*K doubles.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(LSFTS_BUILDING_LIBRARY)
#define LSFTS_API __attribute__((visibility("default")))
#else
#define LSFTS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsfts_status {
  LSFTS_OK = 0,
  LSFTS_INVALID_ARGUMENT = 1,
  LSFTS_CONFIG = 2,
  LSFTS_STABILITY = 3,
  LSFTS_BOUNDARY = 4,
  LSFTS_IO = 5,
  LSFTS_PARSE = 6,
  LSFTS_NUMERIC = 7,
  LSFTS_INTERNAL = 99
} lsfts_status;

typedef struct lsfts_model lsfts_model;
typedef struct lsfts_series lsfts_series;
typedef struct lsfts_estimator lsfts_estimator;
typedef struct lsfts_grid lsfts_grid;

LSFTS_API const char* lsfts_version(void);
LSFTS_API const char* lsfts_last_error(void);
LSFTS_API const char* lsfts_status_name(lsfts_status status);
LSFTS_API void lsfts_string_free(char* s);

/* Models. K <= 0 selects the preset default (15). */
LSFTS_API lsfts_status lsfts_model_preset(const char* name, int K, uint64_t seed, lsfts_model** out);
LSFTS_API lsfts_status lsfts_model_far1(double c, double eta, int K, uint64_t seed, lsfts_model** out);
LSFTS_API lsfts_status lsfts_model_white_noise(int K, const double* sigma, lsfts_model** out);
LSFTS_API lsfts_status lsfts_model_tvar1(double intercept, double slope, lsfts_model** out);
LSFTS_API lsfts_status lsfts_model_from_json(const char* json, lsfts_model** out);
LSFTS_API lsfts_status lsfts_model_load(const char* path, lsfts_model** out);
LSFTS_API lsfts_status lsfts_model_to_json(const lsfts_model* model, char** json);
LSFTS_API lsfts_status lsfts_model_save(const lsfts_model* model, const char* path);
LSFTS_API int lsfts_model_dim(const lsfts_model* model);
/* Companion-radius check on the default u grid; report_json may be NULL. */
LSFTS_API lsfts_status lsfts_model_stability(const lsfts_model* model, int* passed, char** report_json);
LSFTS_API void lsfts_model_free(lsfts_model* model);

/* Frozen-time quantities; out holds 2*K*K doubles. */
LSFTS_API lsfts_status lsfts_transfer_operator(const lsfts_model* model, double u, double omega, double* out);
LSFTS_API lsfts_status lsfts_spectral_density(const lsfts_model* model, double u, double omega, double* out);
LSFTS_API lsfts_status lsfts_local_autocov(const lsfts_model* model, long T, double u, long s, double* out);

/* Series. data is K*T doubles, column t-1 holding X_t. */
LSFTS_API lsfts_status lsfts_simulate(const lsfts_model* model, long T, uint64_t seed, long burn_in,
                                      lsfts_series** out);
LSFTS_API lsfts_status lsfts_series_from_data(int K, long T, const double* data, lsfts_series** out);
/* Coefficient or grid series files; grid files are projected onto K functions. */
LSFTS_API lsfts_status lsfts_series_read(const char* path, int K, lsfts_series** out);
LSFTS_API lsfts_status lsfts_series_write(const lsfts_series* series, const char* path);
LSFTS_API long lsfts_series_length(const lsfts_series* series);
LSFTS_API int lsfts_series_dim(const lsfts_series* series);
LSFTS_API lsfts_status lsfts_series_data(const lsfts_series* series, double* out);
LSFTS_API void lsfts_series_free(lsfts_series* series);

/* Estimator settings. taper: "flat", "cosine_flat" or "parabolic". */
LSFTS_API lsfts_status lsfts_estimator_auto(long T, const char* taper, double rho, lsfts_estimator** out);
LSFTS_API lsfts_status lsfts_estimator_create(int N, double b_t, double b_f, const char* taper, double rho,
                                              lsfts_estimator** out);
LSFTS_API lsfts_status lsfts_estimator_params(const lsfts_estimator* est, int* N, double* b_t, double* b_f);
LSFTS_API lsfts_status lsfts_estimator_band(const lsfts_estimator* est, long T, double* lo, double* hi);
LSFTS_API void lsfts_estimator_free(lsfts_estimator* est);

/* Spectral grids over u x omega. */
LSFTS_API lsfts_status lsfts_truth_grid(const lsfts_model* model, const double* u, size_t nu, const double* omega,
                                        size_t nomega, int threads, lsfts_grid** out);
LSFTS_API lsfts_status lsfts_estimate_grid(const lsfts_series* series, const lsfts_estimator* est, const double* u,
                                           size_t nu, const double* omega, size_t nomega, int threads,
                                           lsfts_grid** out);
LSFTS_API lsfts_status lsfts_grid_shape(const lsfts_grid* grid, size_t* nu, size_t* nomega, int* K);
LSFTS_API lsfts_status lsfts_grid_value(const lsfts_grid* grid, size_t iu, size_t iomega, double* out);
/* mode: "coeff" or "kernel"; render_points applies to kernel mode. */
LSFTS_API lsfts_status lsfts_grid_write(const lsfts_grid* grid, const char* path, const char* mode,
                                        int render_points);
LSFTS_API lsfts_status lsfts_grid_read(const char* path, lsfts_grid** out);
LSFTS_API lsfts_status lsfts_grid_imse(const lsfts_grid* estimate, const lsfts_grid* truth, double* out);
LSFTS_API void lsfts_grid_free(lsfts_grid* grid);

/*
 * Runs a pipeline command (simulate, truth, estimate, evaluate, reproduce,
 * check). config_json may be NULL or empty; overrides_json, if given, is a JSON
 * object merged over the config. The command summary is returned as JSON.
 */
LSFTS_API lsfts_status lsfts_run_command(const char* command, const char* config_json, const char* overrides_json,
                                         char** result_json);

#ifdef __cplusplus
}
#endif

#endif
