#ifndef SDWLDA_H
#define SDWLDA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum SdwldaStatus {
  SDWLDA_STATUS_OK = 0,
  SDWLDA_STATUS_NULL_POINTER = 1,
  SDWLDA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or degenerate input data.
   */
  SDWLDA_STATUS_DATA = 3,
  /**
   * The solver could not produce a certified model.
   */
  SDWLDA_STATUS_SOLVER = 4,
  SDWLDA_STATUS_IO = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  SDWLDA_STATUS_INTERNAL = 6,
} SdwldaStatus;

/**
 * Labelled training data.
 */
typedef struct SdwldaDataset SdwldaDataset;

/**
 * A fitted projection.
 */
typedef struct SdwldaModel SdwldaModel;

/**
 * Fit parameters. Obtain defaults from [`sdwlda_fit_options_default`].
 */
typedef struct SdwldaFitOptions {
  /**
   * Target dimension.
   */
  size_t r;
  /**
   * Relative bisection tolerance.
   */
  double sigma;
  /**
   * Infeasibility certificate threshold.
   */
  double epsilon;
  /**
   * Primal verification tolerance.
   */
  double primal_tol;
  double delta_cap;
  size_t max_bisection_steps;
} SdwldaFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sdwlda_version(void);

/**
 * Message for the most recent failure on this thread, or NULL.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *sdwlda_last_error(void);

struct SdwldaFitOptions sdwlda_fit_options_default(size_t r);

/**
 * Copies `n x d` samples and `n` labels in `0..num_classes` into a new dataset.
 *
 * # Safety
 * `samples` must point to `n * d` doubles and `labels` to `n` values.
 * `out` must be a valid pointer.
 */
enum SdwldaStatus sdwlda_dataset_new(const double *samples,
                                     const size_t *labels,
                                     size_t n,
                                     size_t d,
                                     size_t num_classes,
                                     struct SdwldaDataset **out);

/**
 * # Safety
 * `dataset` must be NULL or a handle from [`sdwlda_dataset_new`] not yet freed.
 */
void sdwlda_dataset_free(struct SdwldaDataset *dataset);

/**
 * Fits a model. `options` may be NULL to use the defaults with `r = 1`.
 *
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum SdwldaStatus sdwlda_fit(const struct SdwldaDataset *dataset,
                             const struct SdwldaFitOptions *options,
                             struct SdwldaModel **out);

/**
 * # Safety
 * `model` must be NULL or a live model handle.
 */
void sdwlda_model_free(struct SdwldaModel *model);

/**
 * Input feature width, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
size_t sdwlda_model_input_dim(const struct SdwldaModel *model);

/**
 * Output width `r`, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
size_t sdwlda_model_output_dim(const struct SdwldaModel *model);

/**
 * Certified worst-case ratio level, or NaN for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
double sdwlda_model_delta_star(const struct SdwldaModel *model);

/**
 * Worst-case ratio attained by the relaxed solution, or NaN for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
double sdwlda_model_ratio_achieved(const struct SdwldaModel *model);

/**
 * Copies the `d x r` projection matrix into `out` (row-major).
 *
 * # Safety
 * `out` must have room for `out_len` doubles.
 */
enum SdwldaStatus sdwlda_model_weights(const struct SdwldaModel *model,
                                       double *out,
                                       size_t out_len);

/**
 * Projects `n` rows of width `d_in` into `out`, which receives `n * r` values.
 *
 * # Safety
 * `x` must point to `n * d_in` doubles and `out` to `out_len` doubles.
 */
enum SdwldaStatus sdwlda_model_transform(const struct SdwldaModel *model,
                                         const double *x,
                                         size_t n,
                                         size_t d_in,
                                         double *out,
                                         size_t out_len);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
enum SdwldaStatus sdwlda_model_save(const struct SdwldaModel *model, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
 */
enum SdwldaStatus sdwlda_model_load(const char *path, struct SdwldaModel **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDWLDA_H */
