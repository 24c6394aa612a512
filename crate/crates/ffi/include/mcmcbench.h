#ifndef MCMCBENCH_H
#define MCMCBENCH_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum McbStatus {
  McbStatus_Ok = 0,
  McbStatus_NullPointer = 1,
  McbStatus_InvalidString = 2,
  McbStatus_InvalidParameter = 3,
  McbStatus_Unsupported = 4,
  McbStatus_Shape = 5,
  McbStatus_Config = 6,
  McbStatus_DegenerateSeries = 7,
  McbStatus_SliceFailure = 8,
  McbStatus_Empty = 9,
  McbStatus_Io = 10,
  McbStatus_Format = 11,
  McbStatus_Panic = 99,
} McbStatus;

/**
 * A finished chain with its column names.
 */
typedef struct McbChain McbChain;

/**
 * A model bound to its data.
 */
typedef struct McbModel McbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *mcb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mcb_version(void);

/**
 * Simulate a dataset with default settings and bind it to `prior`.
 *
 * `p_or_h` is the number of coefficients for regressions and the number
 * of components for mixtures.
 *
 * # Safety
 * `prior` must be a NUL-terminated string and `out` a valid pointer.
 */
enum McbStatus mcb_model_simulate(const char *prior,
                                  uintptr_t n,
                                  uintptr_t p_or_h,
                                  uint64_t seed,
                                  struct McbModel **out);

/**
 * Bind user data to `prior`.
 *
 * `x` is row-major `n x p` and may be NULL when `p == 0`. `delta` holds
 * event indicators (1 observed, 0 censored) for AFT models and is NULL
 * otherwise. `h` is the number of mixture components and ignored for
 * regressions.
 *
 * # Safety
 * Array arguments must point to at least the stated number of elements.
 */
enum McbStatus mcb_model_from_data(const char *prior,
                                   const double *y,
                                   uintptr_t n,
                                   const double *x,
                                   uintptr_t p,
                                   const uint8_t *delta,
                                   uintptr_t h,
                                   struct McbModel **out);

/**
 * Release a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void mcb_model_free(struct McbModel *model);

/**
 * Dimension of the unconstrained parameter vector.
 *
 * # Safety
 * `model` must be a live handle or NULL (returns 0).
 */
uintptr_t mcb_model_dim(const struct McbModel *model);

/**
 * Log posterior at unconstrained point `u` of length `len`.
 *
 * # Safety
 * `u` must hold `len` values and `out` must be writable.
 */
enum McbStatus mcb_model_log_posterior(const struct McbModel *model,
                                       const double *u,
                                       uintptr_t len,
                                       double *out);

/**
 * Gradient of the log posterior at `u`, written to `grad` (both of length `len`).
 *
 * # Safety
 * `u` and `grad` must hold `len` values.
 */
enum McbStatus mcb_model_gradient(const struct McbModel *model,
                                  const double *u,
                                  uintptr_t len,
                                  double *grad);

/**
 * Run one chain. `backend` is `gibbs`, `nuts` or `rwmh`.
 *
 * # Safety
 * `backend` must be a NUL-terminated string and `out` a valid pointer.
 */
enum McbStatus mcb_sample(const struct McbModel *model,
                          const char *backend,
                          uintptr_t n_iter,
                          uintptr_t n_burn,
                          uintptr_t n_thin,
                          uint64_t seed,
                          struct McbChain **out);

/**
 * Release a chain. NULL is ignored.
 *
 * # Safety
 * `chain` must come from this library and not be used afterwards.
 */
void mcb_chain_free(struct McbChain *chain);

/**
 * Number of retained draws, or 0 for NULL.
 *
 * # Safety
 * `chain` must be a live handle or NULL.
 */
uintptr_t mcb_chain_draws(const struct McbChain *chain);

/**
 * Number of monitored columns, or 0 for NULL.
 *
 * # Safety
 * `chain` must be a live handle or NULL.
 */
uintptr_t mcb_chain_dim(const struct McbChain *chain);

/**
 * Name of column `j`, owned by the chain, or NULL when out of range.
 *
 * # Safety
 * `chain` must be a live handle or NULL.
 */
const char *mcb_chain_column_name(const struct McbChain *chain, uintptr_t j);

/**
 * Copy the draws, row-major `draws x dim`, into `buf` of length `len`.
 *
 * # Safety
 * `buf` must hold `len` values.
 */
enum McbStatus mcb_chain_samples(const struct McbChain *chain, double *buf, uintptr_t len);

/**
 * Sampling wall-clock time in seconds, or NaN for NULL.
 *
 * # Safety
 * `chain` must be a live handle or NULL.
 */
double mcb_chain_seconds(const struct McbChain *chain);

/**
 * Headline diagnostics of a chain fitted to `model`: mean E over the
 * default parameter subset, LPML and WAIC.
 *
 * # Safety
 * Output pointers must be writable.
 */
enum McbStatus mcb_chain_summary(const struct McbModel *model,
                                 const struct McbChain *chain,
                                 double *mean_e,
                                 double *lpml,
                                 double *waic);

/**
 * Run an experiment described by a JSON config and return the report rows
 * as a JSON array. Free the result with [`mcb_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum McbStatus mcb_run_experiment_json(const char *config_json, char **out);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void mcb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCMCBENCH_H */
