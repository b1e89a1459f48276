#ifndef ITEMDIFF_H
#define ITEMDIFF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ItemdiffStatus {
  ITEMDIFF_STATUS_OK = 0,
  ITEMDIFF_STATUS_NULL_POINTER = 1,
  ITEMDIFF_STATUS_INVALID_UTF8 = 2,
  ITEMDIFF_STATUS_INVALID_ARGUMENT = 3,
  ITEMDIFF_STATUS_BUFFER_TOO_SMALL = 4,
  ITEMDIFF_STATUS_IO = 5,
  ITEMDIFF_STATUS_BANK = 6,
  ITEMDIFF_STATUS_SCALE = 7,
  ITEMDIFF_STATUS_FEATURES = 8,
  ITEMDIFF_STATUS_TEXT = 9,
  ITEMDIFF_STATUS_EMBED = 10,
  ITEMDIFF_STATUS_NUMERICS = 11,
  ITEMDIFF_STATUS_EVAL = 12,
  ITEMDIFF_STATUS_RUN = 13,
  ITEMDIFF_STATUS_PANIC = 14,
} ItemdiffStatus;

/**
 * A loaded experiment config.
 */
typedef struct ItemdiffConfig ItemdiffConfig;

/**
 * A fitted PCA projection.
 */
typedef struct ItemdiffPca ItemdiffPca;

/**
 * A fitted ridge regression.
 */
typedef struct ItemdiffRidge ItemdiffRidge;

/**
 * A single vertical scale or a per-year composite.
 */
typedef struct ItemdiffScale ItemdiffScale;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *itemdiff_version(void);

/**
 * Message of the last failed call on this thread, or NULL if none has
 * failed. Valid until the next failing call on the same thread.
 */
const char *itemdiff_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a string allocated by this library, freed once.
 */
void itemdiff_string_free(char *s);

/**
 * Looks up a built-in scale or composite by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_scale_builtin(const char *name, struct ItemdiffScale **out);

/**
 * Parses a scale definition (JSON with `grade_means` and either `affine`
 * or `anchors`).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_scale_from_json(const char *json, struct ItemdiffScale **out);

/**
 * A copy of a single scale with its affine map refitted so that an item
 * with p-value `p` lands at `b_a` in `grade_a` and at `b_b` in `grade_b`.
 *
 * # Safety
 * `scale` must be a live handle; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_scale_with_anchors(const struct ItemdiffScale *scale,
                                                uint8_t grade_a,
                                                double b_a,
                                                uint8_t grade_b,
                                                double b_b,
                                                double p,
                                                struct ItemdiffScale **out);

/**
 * Easiness of an item with p-value `p` answered by `grade` in `year`.
 * `year` only matters for composite scales.
 *
 * # Safety
 * `scale` must be a live handle; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_scale_rescale(const struct ItemdiffScale *scale,
                                           double p,
                                           uint8_t grade,
                                           int32_t year,
                                           double *out);

/**
 * The p-value that maps to easiness `b`; inverse of
 * [`itemdiff_scale_rescale`].
 *
 * # Safety
 * `scale` must be a live handle; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_scale_invert(const struct ItemdiffScale *scale,
                                          double b,
                                          uint8_t grade,
                                          int32_t year,
                                          double *out);

/**
 * # Safety
 * `scale` must be NULL or a live handle, freed once.
 */
void itemdiff_scale_free(struct ItemdiffScale *scale);

/**
 * Fits ridge regression on the `n x p` row-major matrix `x` and outcome
 * `y` (length `n`).
 *
 * # Safety
 * `x` must hold `n * p` doubles, `y` `n` doubles; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_ridge_fit(const double *x,
                                       size_t n,
                                       size_t p,
                                       const double *y,
                                       double lambda,
                                       struct ItemdiffRidge **out);

/**
 * Number of predictors the model was fitted on.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t itemdiff_ridge_n_features(const struct ItemdiffRidge *model);

/**
 * Predictions for the `n x p` row-major matrix `x`, written to `out`
 * (length `n`).
 *
 * # Safety
 * `x` must hold `n * p` doubles and `out` room for `n`.
 */
enum ItemdiffStatus itemdiff_ridge_predict(const struct ItemdiffRidge *model,
                                           const double *x,
                                           size_t n,
                                           size_t p,
                                           double *out);

/**
 * Coefficients and intercept on the original (unstandardized) inputs.
 * `out` needs room for `len >= n_features` values.
 *
 * # Safety
 * `out` must hold `len` doubles; `intercept` must be writable.
 */
enum ItemdiffStatus itemdiff_ridge_raw_coefficients(const struct ItemdiffRidge *model,
                                                    double *out,
                                                    size_t len,
                                                    double *intercept);

/**
 * Serialized model; free with [`itemdiff_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_ridge_to_json(const struct ItemdiffRidge *model, char **out);

/**
 * # Safety
 * `model` must be NULL or a live handle, freed once.
 */
void itemdiff_ridge_free(struct ItemdiffRidge *model);

/**
 * Fits PCA on the `n x p` row-major matrix `x`, keeping the fewest
 * components whose cumulative explained-variance ratio reaches
 * `variance_target`.
 *
 * # Safety
 * `x` must hold `n * p` doubles; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_pca_fit(const double *x,
                                     size_t n,
                                     size_t p,
                                     double variance_target,
                                     struct ItemdiffPca **out);

/**
 * Number of kept components.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t itemdiff_pca_k(const struct ItemdiffPca *model);

/**
 * Explained-variance ratios of all components, largest first. On
 * `ITEMDIFF_STATUS_BUFFER_TOO_SMALL`, `*written` holds the needed length.
 *
 * # Safety
 * `out` must hold `len` doubles; `written` must be writable.
 */
enum ItemdiffStatus itemdiff_pca_explained_variance_ratio(const struct ItemdiffPca *model,
                                                          double *out,
                                                          size_t len,
                                                          size_t *written);

/**
 * Scores of the `n x p` rows of `x` on the kept components, written
 * row-major to `out` (`n * k` values).
 *
 * # Safety
 * `x` must hold `n * p` doubles and `out` room for `n * k`.
 */
enum ItemdiffStatus itemdiff_pca_transform(const struct ItemdiffPca *model,
                                           const double *x,
                                           size_t n,
                                           size_t p,
                                           double *out);

/**
 * # Safety
 * `model` must be NULL or a live handle, freed once.
 */
void itemdiff_pca_free(struct ItemdiffPca *model);

/**
 * Loads and validates a run config. Relative paths inside it resolve
 * against its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_config_load(const char *path, struct ItemdiffConfig **out);

/**
 * Hash identifying the config's results; free with
 * [`itemdiff_string_free`].
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum ItemdiffStatus itemdiff_config_fingerprint(const struct ItemdiffConfig *config, char **out);

/**
 * Runs the baseline and every spec, writing report files to the config's
 * output directory. `*reports_json` receives the reports as a JSON array;
 * free it with [`itemdiff_string_free`].
 *
 * # Safety
 * `config` must be a live handle; `reports_json` must be writable.
 */
enum ItemdiffStatus itemdiff_run_grid(const struct ItemdiffConfig *config, char **reports_json);

/**
 * # Safety
 * `config` must be NULL or a live handle, freed once.
 */
void itemdiff_config_free(struct ItemdiffConfig *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ITEMDIFF_H */
