#ifndef CASBAH_H
#define CASBAH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CasbahStatus {
  CASBAH_STATUS_OK = 0,
  CASBAH_STATUS_NULL_POINTER = 1,
  CASBAH_STATUS_INVALID_INPUT = 2,
  CASBAH_STATUS_NUMERICAL = 3,
  CASBAH_STATUS_BUFFER_TOO_SMALL = 4,
  CASBAH_STATUS_PANIC = 5,
} CasbahStatus;

/**
 * Observed data: covariates, treatment, post-treatment variable and outcome.
 */
typedef struct CasbahDataset CasbahDataset;

/**
 * A completed fit with its post-processed strata.
 */
typedef struct CasbahFit CasbahFit;

/**
 * Sampler settings and priors. Obtain defaults from [`casbah_fit_options_default`].
 */
typedef struct CasbahFitOptions {
  size_t truncation;
  size_t iterations;
  size_t burn_in;
  size_t thin;
  size_t tmvn_sweeps;
  uint64_t seed;
  double mu_eta;
  double sigma2_eta;
  double gamma1;
  double gamma2;
  double xi;
  double omega2;
  double mu_theta;
  double sigma2_theta;
  double mu_lambda;
  double sigma2_lambda;
} CasbahFitOptions;

/**
 * Posterior median and 90% equal-tailed interval. `present` is 0 when the
 * stratum never occurs, in which case the other fields are NaN.
 */
typedef struct CasbahInterval {
  int32_t present;
  double median;
  double lower;
  double upper;
} CasbahInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *casbah_last_error(void);

/**
 * Static, NUL-terminated library version.
 */
const char *casbah_version(void);

struct CasbahFitOptions casbah_fit_options_default(void);

/**
 * Copies `n` units into a new dataset. `x` is row-major `n x p` (may be null
 * when `p == 0`); `treated` holds 0 or 1 per unit.
 *
 * # Safety
 * Every non-null array must be valid for the stated number of reads and
 * `out` must be valid for one write.
 */
enum CasbahStatus casbah_dataset_new(size_t n,
                                     size_t p,
                                     const double *x,
                                     const uint8_t *treated,
                                     const double *p_obs,
                                     const double *y_obs,
                                     struct CasbahDataset **out);

/**
 * Draws a synthetic dataset from built-in scenario `scenario` (1 to 5).
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum CasbahStatus casbah_dataset_simulate(uint8_t scenario,
                                          size_t n,
                                          uint64_t seed,
                                          struct CasbahDataset **out);

/**
 * Number of units; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t casbah_dataset_units(const struct CasbahDataset *ds);

/**
 * Number of covariates; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t casbah_dataset_covariates(const struct CasbahDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void casbah_dataset_free(struct CasbahDataset *ds);

/**
 * Runs the sampler on a copy of `ds`. `options` may be null for defaults.
 *
 * # Safety
 * `ds` must be a live dataset handle, `options` null or valid, `out` valid
 * for one write.
 */
enum CasbahStatus casbah_fit_run(const struct CasbahDataset *ds,
                                 const struct CasbahFitOptions *options,
                                 struct CasbahFit **out);

/**
 * Number of kept iterations; 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a live fit handle.
 */
size_t casbah_fit_draws(const struct CasbahFit *fit);

/**
 * Writes the point-partition stratum code of every unit into `codes`.
 *
 * # Safety
 * `fit` must be a live fit handle and `codes` valid for `len` writes.
 */
enum CasbahStatus casbah_fit_point_partition(const struct CasbahFit *fit,
                                             int32_t *codes,
                                             size_t len);

/**
 * Writes per-unit stratum probabilities, row-major `n x 3` in the order
 * negative, dissociative, positive.
 *
 * # Safety
 * `fit` must be a live fit handle and `probs` valid for `len` writes.
 */
enum CasbahStatus casbah_fit_stratum_probabilities(const struct CasbahFit *fit,
                                                   double *probs,
                                                   size_t len);

/**
 * Principal causal effect of stratum `code`.
 *
 * # Safety
 * `fit` must be a live fit handle and `out` valid for one write.
 */
enum CasbahStatus casbah_fit_effect(const struct CasbahFit *fit,
                                    int32_t code,
                                    struct CasbahInterval *out);

/**
 * Mean `P(1) - P(0)` within stratum `code`.
 *
 * # Safety
 * `fit` must be a live fit handle and `out` valid for one write.
 */
enum CasbahStatus casbah_fit_post_treatment_gap(const struct CasbahFit *fit,
                                                int32_t code,
                                                struct CasbahInterval *out);

/**
 * # Safety
 * `fit` must be null or a handle not yet freed.
 */
void casbah_fit_free(struct CasbahFit *fit);

/**
 * Prior probability that both arms share a cluster, from the stick moments.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum CasbahStatus casbah_prior_dissociative_probability(double rho1,
                                                        double rho2,
                                                        size_t truncation,
                                                        double *out);

/**
 * Adjusted Rand index of two integer labelings of length `n >= 2`.
 *
 * # Safety
 * `a` and `b` must be valid for `n` reads and `out` for one write.
 */
enum CasbahStatus casbah_adjusted_rand_index(const int32_t *a,
                                             const int32_t *b,
                                             size_t n,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASBAH_H */
