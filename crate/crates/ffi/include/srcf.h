#ifndef SRCF_H
#define SRCF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrcfStatus {
  SRCF_STATUS_OK = 0,
  SRCF_STATUS_NULL_POINTER = 1,
  SRCF_STATUS_INVALID_ARGUMENT = 2,
  SRCF_STATUS_DIVERGED = 3,
  SRCF_STATUS_NON_FINITE = 4,
  SRCF_STATUS_CALLBACK_FAILED = 5,
  SRCF_STATUS_PANIC = 6,
} SrcfStatus;

typedef enum SrcfSchemeKind {
  SRCF_SCHEME_KIND_CKF3 = 0,
  SRCF_SCHEME_KIND_CKF5 = 1,
  SRCF_SCHEME_KIND_SIF3 = 2,
  SRCF_SCHEME_KIND_SIF5 = 3,
  SRCF_SCHEME_KIND_QSIF5 = 4,
  SRCF_SCHEME_KIND_MC = 5,
} SrcfSchemeKind;

/**
 * A running filter.
 */
typedef struct SrcfFilter SrcfFilter;

/**
 * A weighted sigma-point set.
 */
typedef struct SrcfRule SrcfRule;

/**
 * Integration scheme selector. `n_m` is ignored for CKF3/CKF5 and
 * `mc_samples` for everything but MC.
 */
typedef struct SrcfScheme {
  enum SrcfSchemeKind kind;
  size_t n_m;
  size_t mc_samples;
} SrcfScheme;

/**
 * `out[0..out_len] = g(x[0..n])`; return 0 on success.
 */
typedef int32_t (*SrcfCallback)(void *user_data,
                                const double *x,
                                size_t n,
                                double *out,
                                size_t out_len);

/**
 * Nonlinear model `x' = f(x) + w`, `y = h(x) + v` with `w ~ N(0, Q)`,
 * `v ~ N(0, R)`. `q` is `state_dim²` and `r` is `obs_dim²` values.
 */
typedef struct SrcfModel {
  size_t state_dim;
  size_t obs_dim;
  SrcfCallback transition;
  SrcfCallback observation;
  void *user_data;
  const double *q;
  const double *r;
} SrcfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next library call on the same thread.
 */
const char *srcf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *srcf_version(void);

/**
 * Draws a single sigma-point set (one repetition) for dimension `n`.
 *
 * # Safety
 * `scheme` must be valid to read and `out` valid to write.
 */
enum SrcfStatus srcf_rule_build(const struct SrcfScheme *scheme,
                                size_t n,
                                uint64_t seed,
                                struct SrcfRule **out);

/**
 * Number of points, or 0 for a null handle.
 *
 * # Safety
 * `rule` must be null or a live handle.
 */
size_t srcf_rule_len(const struct SrcfRule *rule);

/**
 * Point dimension, or 0 for a null handle.
 *
 * # Safety
 * `rule` must be null or a live handle.
 */
size_t srcf_rule_dim(const struct SrcfRule *rule);

/**
 * Copies the points as a `len × dim` row-major array (one point per row).
 *
 * # Safety
 * `rule` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SrcfStatus srcf_rule_points(const struct SrcfRule *rule, double *out, size_t out_len);

/**
 * Copies the weights.
 *
 * # Safety
 * `rule` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SrcfStatus srcf_rule_weights(const struct SrcfRule *rule, double *out, size_t out_len);

/**
 * # Safety
 * `rule` must be null or a handle from [`srcf_rule_build`] not yet freed.
 */
void srcf_rule_free(struct SrcfRule *rule);

/**
 * Estimates `E[g(x)]` for `x ~ N(mean, cov)`, writing `out_len` values.
 *
 * # Safety
 * Pointers must be valid for the stated lengths (`cov` holds `n²` values).
 */
enum SrcfStatus srcf_expect(const struct SrcfScheme *scheme,
                            size_t n,
                            const double *mean,
                            const double *cov,
                            SrcfCallback g,
                            void *user_data,
                            uint64_t seed,
                            double *out,
                            size_t out_len);

/**
 * Creates a filter with initial belief `N(init_mean, init_cov)`.
 *
 * # Safety
 * `model` must be valid, its `q`/`r` arrays must hold `state_dim²` and
 * `obs_dim²` values, `init_cov` `state_dim²` values, and `user_data` must
 * stay valid until the filter is freed.
 */
enum SrcfStatus srcf_filter_new(const struct SrcfModel *model,
                                const struct SrcfScheme *scheme,
                                const double *init_mean,
                                const double *init_cov,
                                uint64_t seed,
                                struct SrcfFilter **out);

/**
 * Processes one observation of length `obs_dim`. After a failure the
 * filter keeps its previous belief.
 *
 * # Safety
 * `filter` must be a live handle and `y` must hold `y_len` doubles.
 */
enum SrcfStatus srcf_filter_step(struct SrcfFilter *filter, const double *y, size_t y_len);

/**
 * Steps processed so far, or 0 for a null handle.
 *
 * # Safety
 * `filter` must be null or a live handle.
 */
size_t srcf_filter_steps(const struct SrcfFilter *filter);

/**
 * Copies the current mean (`state_dim` values).
 *
 * # Safety
 * `filter` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SrcfStatus srcf_filter_mean(const struct SrcfFilter *filter, double *out, size_t out_len);

/**
 * Copies the current covariance (`state_dim²` values, row-major).
 *
 * # Safety
 * `filter` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SrcfStatus srcf_filter_cov(const struct SrcfFilter *filter, double *out, size_t out_len);

/**
 * # Safety
 * `filter` must be null or a handle from [`srcf_filter_new`] not yet freed.
 */
void srcf_filter_free(struct SrcfFilter *filter);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRCF_H */
