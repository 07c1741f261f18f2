#ifndef BDW_H
#define BDW_H

#include <stdint.h>
#include <stddef.h>

/**
 * Result codes.
 */
typedef enum BdwStatus {
  BDW_STATUS_OK = 0,
  BDW_STATUS_NULL_POINTER = 1,
  BDW_STATUS_INVALID_PARAMETER = 2,
  BDW_STATUS_INVALID_ARGUMENT = 3,
  BDW_STATUS_EMPTY_DATA = 4,
  BDW_STATUS_DEGENERATE_DATA = 5,
  BDW_STATUS_ZERO_PROBABILITY = 6,
  BDW_STATUS_UNIDENTIFIABLE = 7,
  BDW_STATUS_NOT_POSITIVE_DEFINITE = 8,
  BDW_STATUS_PARSE = 9,
  BDW_STATUS_IO = 10,
  /**
   * A numerical failure not covered above.
   */
  BDW_STATUS_NUMERICAL = 11,
  /**
   * The library panicked; this is a bug.
   */
  BDW_STATUS_PANIC = 12,
} BdwStatus;

/**
 * Paired non-negative counts.
 */
typedef struct BdwDataset BdwDataset;

/**
 * Result of a maximum-likelihood fit.
 */
typedef struct BdwFit BdwFit;

/**
 * BDW parameters `(alpha, p0, p1, p2)`.
 */
typedef struct BdwParams BdwParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *bdw_last_error_message(void);

/**
 * Creates a parameter handle.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum BdwStatus bdw_params_new(double alpha,
                              double p0,
                              double p1,
                              double p2,
                              struct BdwParams **out);

/**
 * Releases a parameter handle; null is ignored.
 *
 * # Safety
 * `params` must come from [`bdw_params_new`] and not be used afterwards.
 */
void bdw_params_free(struct BdwParams *params);

/**
 * `P(X1 = x1, X2 = x2)`.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum BdwStatus bdw_pmf(const struct BdwParams *params, uint64_t x1, uint64_t x2, double *out);

/**
 * `P(X1 >= x1, X2 >= x2)`.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum BdwStatus bdw_sf(const struct BdwParams *params, uint64_t x1, uint64_t x2, double *out);

/**
 * `P(X1 <= x1, X2 <= x2)`.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum BdwStatus bdw_cdf(const struct BdwParams *params, uint64_t x1, uint64_t x2, double *out);

/**
 * Draws `n` pairs with a seeded generator into `x1[0..n]` and `x2[0..n]`.
 *
 * # Safety
 * `params` must be a live handle; `x1` and `x2` must each hold `n` values.
 */
enum BdwStatus bdw_sample(const struct BdwParams *params,
                          uint64_t seed,
                          uintptr_t n,
                          uint64_t *x1,
                          uint64_t *x2);

/**
 * Copies `n` pairs into a new dataset handle.
 *
 * # Safety
 * `x1` and `x2` must each hold `n` values; `out` must be writable.
 */
enum BdwStatus bdw_dataset_new(const uint64_t *x1,
                               const uint64_t *x2,
                               uintptr_t n,
                               struct BdwDataset **out);

/**
 * Loads a bundled dataset by name (`"football"` or `"nasal"`).
 *
 * # Safety
 * `name` must be a nul-terminated string; `out` must be writable.
 */
enum BdwStatus bdw_dataset_builtin(const char *name, struct BdwDataset **out);

/**
 * Number of pairs, or 0 for null.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
uintptr_t bdw_dataset_len(const struct BdwDataset *data);

/**
 * Releases a dataset handle; null is ignored.
 *
 * # Safety
 * `data` must come from a dataset constructor and not be used afterwards.
 */
void bdw_dataset_free(struct BdwDataset *data);

/**
 * Maximum-likelihood fit by nested EM with default settings, started from
 * the univariate-fit initial estimates.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum BdwStatus bdw_fit_ml(const struct BdwDataset *data, struct BdwFit **out);

/**
 * Writes `(alpha, lambda0, lambda1, lambda2)` to `theta[0..4]`.
 *
 * # Safety
 * `fit` must be a live handle; `theta` must hold 4 values.
 */
enum BdwStatus bdw_fit_theta(const struct BdwFit *fit, double *theta);

/**
 * Writes `(alpha, p0, p1, p2)` to `params[0..4]`.
 *
 * # Safety
 * `fit` must be a live handle; `params` must hold 4 values.
 */
enum BdwStatus bdw_fit_bdw_params(const struct BdwFit *fit, double *params);

/**
 * Observed-data log-likelihood at the estimate.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum BdwStatus bdw_fit_loglik(const struct BdwFit *fit, double *out);

/**
 * Outer iterations performed.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum BdwStatus bdw_fit_iterations(const struct BdwFit *fit, uintptr_t *out);

/**
 * 95% Wald bounds of `(alpha, lambda0, lambda1, lambda2)`. Fails with
 * [`BdwStatus::NotPositiveDefinite`] when the fit carries no intervals.
 *
 * # Safety
 * `fit` must be a live handle; `lower` and `upper` must each hold 4 values.
 */
enum BdwStatus bdw_fit_ci(const struct BdwFit *fit, double *lower, double *upper);

/**
 * Releases a fit handle; null is ignored.
 *
 * # Safety
 * `fit` must come from [`bdw_fit_ml`] and not be used afterwards.
 */
void bdw_fit_free(struct BdwFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDW_H */
