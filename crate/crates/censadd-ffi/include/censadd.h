#ifndef CENSADD_H
#define CENSADD_H

/* This file is generated by cbindgen from the censadd-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum CensaddStatus {
  /**
   * Success.
   */
  CENSADD_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CENSADD_STATUS_NULL_POINTER = 1,
  /**
   * Invalid input: malformed configuration, bad data, or a dimension
   * mismatch.
   */
  CENSADD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A numerical failure inside the fit.
   */
  CENSADD_STATUS_NUMERICAL = 3,
  /**
   * An internal panic was caught at the boundary.
   */
  CENSADD_STATUS_PANIC = 4,
} CensaddStatus;

/**
 * Band column selector for [`censadd_fit_band`].
 */
typedef enum CensaddBandColumn {
  /**
   * Grid abscissae.
   */
  CENSADD_BAND_COLUMN_GRID = 0,
  /**
   * Estimated additive component.
   */
  CENSADD_BAND_COLUMN_ETA = 1,
  /**
   * Plug-in standard deviation.
   */
  CENSADD_BAND_COLUMN_SIGMA = 2,
  /**
   * Lower confidence bound.
   */
  CENSADD_BAND_COLUMN_CI_LO = 3,
  /**
   * Upper confidence bound.
   */
  CENSADD_BAND_COLUMN_CI_HI = 4,
} CensaddBandColumn;

/**
 * Opaque fit handle: per-axis bands plus the fit report.
 */
typedef struct CensaddFit CensaddFit;

/**
 * Opaque censored sample handle.
 */
typedef struct CensaddSample CensaddSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the most recent error message on this thread as a heap-allocated
 * string, or null when no error is recorded. Free it with
 * [`censadd_string_free`].
 */
char *censadd_last_error_message(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `ptr` must be null or a string previously returned by this library, and
 * must not be used afterwards.
 */
void censadd_string_free(char *ptr);

/**
 * Library version as a static string; do not free.
 */
const char *censadd_version(void);

/**
 * Builds a censored sample from flat arrays.
 *
 * `z` and `delta` have length `n`; `x` is row-major with `n` rows of `d`
 * covariates. On success writes a handle to `out`; free it with
 * [`censadd_sample_free`].
 *
 * # Safety
 * `z` and `delta` must point to `n` readable elements, `x` to `n * d`
 * readable elements, and `out` to a writable pointer slot.
 */
enum CensaddStatus censadd_sample_new(const double *z,
                                      const uint8_t *delta,
                                      const double *x,
                                      size_t n,
                                      size_t d,
                                      struct CensaddSample **out);

/**
 * Frees a sample handle. Null is ignored.
 *
 * # Safety
 * `sample` must be null or a handle from [`censadd_sample_new`], and must
 * not be used afterwards.
 */
void censadd_sample_free(struct CensaddSample *sample);

/**
 * Number of observations in the sample.
 *
 * # Safety
 * `sample` must be null or a live handle from [`censadd_sample_new`].
 */
size_t censadd_sample_n(const struct CensaddSample *sample);

/**
 * Covariate dimension of the sample.
 *
 * # Safety
 * `sample` must be null or a live handle from [`censadd_sample_new`].
 */
size_t censadd_sample_dim(const struct CensaddSample *sample);

/**
 * Runs the full fit pipeline on a sample.
 *
 * `config_json` uses the same schema as the CLI fit configuration. On
 * success writes a fit handle to `out`; free it with [`censadd_fit_free`].
 *
 * # Safety
 * `sample` must be a live handle, `config_json` a NUL-terminated string,
 * and `out` a writable pointer slot.
 */
enum CensaddStatus censadd_fit_run(const struct CensaddSample *sample,
                                   const char *config_json,
                                   struct CensaddFit **out);

/**
 * Frees a fit handle. Null is ignored.
 *
 * # Safety
 * `fit` must be null or a handle from [`censadd_fit_run`], and must not be
 * used afterwards.
 */
void censadd_fit_free(struct CensaddFit *fit);

/**
 * Number of fitted additive components (the covariate dimension).
 *
 * # Safety
 * `fit` must be null or a live handle from [`censadd_fit_run`].
 */
size_t censadd_fit_dim(const struct CensaddFit *fit);

/**
 * Constant term of the additive predictor.
 *
 * # Safety
 * `fit` must be null or a live handle from [`censadd_fit_run`].
 */
double censadd_fit_constant(const struct CensaddFit *fit);

/**
 * Grid length of one component; zero for an out-of-range axis.
 *
 * # Safety
 * `fit` must be null or a live handle from [`censadd_fit_run`].
 */
size_t censadd_fit_grid_len(const struct CensaddFit *fit, size_t axis);

/**
 * Copies one band column of one component into `out`, which must hold
 * `len >= censadd_fit_grid_len(fit, axis)` doubles.
 *
 * # Safety
 * `fit` must be a live handle and `out` must point to `len` writable
 * doubles.
 */
enum CensaddStatus censadd_fit_band(const struct CensaddFit *fit,
                                    size_t axis,
                                    enum CensaddBandColumn column,
                                    double *out,
                                    size_t len);

/**
 * Serializes the fit report (bandwidths, diagnostics, warnings, censoring
 * survival) as JSON. Free the string with [`censadd_string_free`].
 *
 * # Safety
 * `fit` must be null or a live handle from [`censadd_fit_run`].
 */
char *censadd_fit_report_json(const struct CensaddFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CENSADD_H */
