/* SPDX-License-Identifier: Apache-2.0 */

#ifndef PINN_H
#define PINN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PinnStatus {
  PINN_STATUS_OK = 0,
  PINN_STATUS_NULL_POINTER = 1,
  PINN_STATUS_INVALID_STRING = 2,
  PINN_STATUS_CONFIG = 3,
  PINN_STATUS_USAGE = 4,
  PINN_STATUS_DOMAIN = 5,
  PINN_STATUS_NON_FINITE = 6,
  PINN_STATUS_IO = 7,
  PINN_STATUS_PARSE = 8,
  PINN_STATUS_EVAL = 9,
  PINN_STATUS_RESOLUTION = 10,
  PINN_STATUS_OUT_OF_RANGE = 11,
  PINN_STATUS_PANIC = 12,
} PinnStatus;

/**
 * Experiment configuration handle.
 */
typedef struct PinnConfig PinnConfig;

/**
 * Trained network parameters handle.
 */
typedef struct PinnParams PinnParams;

/**
 * Finished experiment handle.
 */
typedef struct PinnResult PinnResult;

/**
 * Final test-MSE statistics over non-diverged trials. The statistics are
 * NaN when `has_stats` is 0.
 */
typedef struct PinnSummary {
  size_t trials;
  size_t diverged;
  int32_t has_stats;
  double mean;
  double std;
  double median;
} PinnSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next call into this library.
 */
const char *pinn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pinn_version(void);

/**
 * Parse config text. Relative paths in it resolve against `base_dir`
 * (may be null for the current directory).
 *
 * # Safety
 * `text` and `base_dir` must be null or NUL-terminated strings; `out` must
 * be null or writable.
 */
enum PinnStatus pinn_config_parse(const char *text, const char *base_dir, struct PinnConfig **out);

/**
 * Load a config file.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or
 * writable.
 */
enum PinnStatus pinn_config_load(const char *path, struct PinnConfig **out);

/**
 * Override trial count, epoch count and base seed. Zero trials or epochs
 * leave the current value.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum PinnStatus pinn_config_override(struct PinnConfig *cfg,
                                     size_t trials,
                                     uint64_t epochs,
                                     uint64_t seed);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void pinn_config_free(struct PinnConfig *cfg);

/**
 * Train every trial of `cfg` on up to `jobs` threads (0 = all cores).
 *
 * # Safety
 * `cfg` must be null or a live handle; `out` must be null or writable.
 */
enum PinnStatus pinn_run(const struct PinnConfig *cfg, size_t jobs, struct PinnResult **out);

/**
 * # Safety
 * `res` must be null or a live handle; `out` must be null or writable.
 */
enum PinnStatus pinn_result_summary(const struct PinnResult *res, struct PinnSummary *out);

/**
 * Final test MSE of one trial. Fails with `Domain` if the trial diverged or
 * the problem has no reference solution.
 *
 * # Safety
 * `res` must be null or a live handle; `out` must be null or writable.
 */
enum PinnStatus pinn_result_final_test_mse(const struct PinnResult *res, size_t trial, double *out);

/**
 * Write records.csv, curve.csv, curve.svg, summary.csv and parameters
 * into `dir`.
 *
 * # Safety
 * `res` must be null or a live handle; `dir` must be null or a
 * NUL-terminated string.
 */
enum PinnStatus pinn_result_write(const struct PinnResult *res, const char *dir);

/**
 * Copy out the trained parameters of one trial.
 *
 * # Safety
 * `res` must be null or a live handle; `out` must be null or writable.
 */
enum PinnStatus pinn_result_params(const struct PinnResult *res,
                                   size_t trial,
                                   struct PinnParams **out);

/**
 * # Safety
 * `res` must be null or a handle not yet freed.
 */
void pinn_result_free(struct PinnResult *res);

/**
 * Load parameters saved by the trainer.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or
 * writable.
 */
enum PinnStatus pinn_params_load(const char *path, struct PinnParams **out);

/**
 * # Safety
 * `params` must be null or a live handle; `path` must be null or a
 * NUL-terminated string.
 */
enum PinnStatus pinn_params_save(const struct PinnParams *params, const char *path);

/**
 * Input and output widths of the network.
 *
 * # Safety
 * `params` must be null or a live handle; the out-pointers must be null or
 * writable.
 */
enum PinnStatus pinn_params_dims(const struct PinnParams *params, size_t *inputs, size_t *outputs);

/**
 * Evaluate the network at one point: `x` has `n_in` values, `y` room for
 * `n_out`.
 *
 * # Safety
 * `params` must be null or a live handle; `x` must point to `n_in`
 * readable doubles and `y` to `n_out` writable doubles.
 */
enum PinnStatus pinn_params_eval(const struct PinnParams *params,
                                 const double *x,
                                 size_t n_in,
                                 double *y,
                                 size_t n_out);

/**
 * # Safety
 * `params` must be null or a handle not yet freed.
 */
void pinn_params_free(struct PinnParams *params);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINN_H */
