#ifndef EBMON_H
#define EBMON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EbmonStatus {
  EBMON_STATUS_OK = 0,
  EBMON_STATUS_INVALID_INPUT = 2,
  EBMON_STATUS_NUMERICAL = 3,
  EBMON_STATUS_NULL_POINTER = 4,
  EBMON_STATUS_PANIC = 5,
} EbmonStatus;

typedef enum EbmonEstimator {
  EBMON_ESTIMATOR_MLE = 0,
  EBMON_ESTIMATOR_MOMENT = 1,
} EbmonEstimator;

typedef enum EbmonStructure {
  EBMON_STRUCTURE_UNSTRUCTURED = 0,
  EBMON_STRUCTURE_COMPOUND_SYMMETRY = 1,
  EBMON_STRUCTURE_AR1 = 2,
  EBMON_STRUCTURE_RANDOM_COEFFICIENTS = 3,
} EbmonStructure;

/**
 * Longitudinal model (fitted or built from parameters).
 */
typedef struct EbmonModel EbmonModel;

/**
 * Fitted single-year prior together with the data it was fitted to.
 */
typedef struct EbmonPrior EbmonPrior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *ebmon_last_error(void);

/**
 * Crude effect `(O - E) / var` and its variance `1 / var` of one centre-year.
 *
 * # Safety
 * `theta_hat` and `s2` must be valid for writes.
 */
enum EbmonStatus ebmon_crude_effect(double observed,
                                    double expected,
                                    double information,
                                    double *theta_hat,
                                    double *s2);

/**
 * Fits `N(mu, tau2)` to `n` crude effects.
 *
 * # Safety
 * `theta_hat` and `s2` must point to `n` doubles; `out_prior` must be valid
 * for writes.
 */
enum EbmonStatus ebmon_prior_fit(const double *theta_hat,
                                 const double *s2,
                                 size_t n,
                                 enum EbmonEstimator estimator,
                                 struct EbmonPrior **out_prior);

/**
 * Prior mean, variance, marginal log-likelihood and proportion of true
 * variation. Any output pointer may be NULL.
 *
 * # Safety
 * `prior` must come from [`ebmon_prior_fit`]; non-null outputs must be valid
 * for writes.
 */
enum EbmonStatus ebmon_prior_summary(const struct EbmonPrior *prior,
                                     double *mu,
                                     double *tau2,
                                     double *log_likelihood,
                                     double *rho);

/**
 * Posterior mean, variance and shrinkage of every centre (`n` entries each).
 *
 * # Safety
 * Outputs must point to `n` writable doubles, `n` being the fitted count.
 */
enum EbmonStatus ebmon_prior_posteriors(const struct EbmonPrior *prior,
                                        size_t n,
                                        double *ebe,
                                        double *pv,
                                        double *shrinkage);

/**
 * Expected rank, its percentile, the expected percentile (`n` entries each)
 * and the rankability.
 *
 * # Safety
 * Array outputs must point to `n` writable doubles; `ra` must be writable.
 */
enum EbmonStatus ebmon_prior_ranking(const struct EbmonPrior *prior,
                                     size_t n,
                                     double *er,
                                     double *pcer,
                                     double *epc,
                                     double *ra);

/**
 * # Safety
 * `prior` must come from [`ebmon_prior_fit`] (or be NULL) and not be used
 * afterwards.
 */
void ebmon_prior_free(struct EbmonPrior *prior);

/**
 * Fits a covariance structure to a row-major `n_centres x n_years` panel.
 *
 * # Safety
 * `theta_hat` and `s2` must point to `n_centres * n_years` doubles, `years`
 * to `n_years` integers; `out_model` must be valid for writes.
 */
enum EbmonStatus ebmon_panel_fit(const double *theta_hat,
                                 const double *s2,
                                 const int32_t *years,
                                 size_t n_centres,
                                 size_t n_years,
                                 enum EbmonStructure structure,
                                 struct EbmonModel **out_model);

/**
 * Builds a structured model from named parameters (`tau2`, `rho`,
 * `rho_cs`, `alpha`, `beta`, `tau2_a`, `tau2_b`, `rho_ab`). `mean` may be
 * NULL for random coefficients. `time_origin` defaults to the first year
 * minus one when `has_time_origin` is false.
 *
 * # Safety
 * `years` (and `mean` if non-null) must point to `n_years` values; `names`
 * and `values` to `n_params` entries of NUL-terminated strings and doubles.
 */
enum EbmonStatus ebmon_model_from_params(enum EbmonStructure structure,
                                         const int32_t *years,
                                         size_t n_years,
                                         const double *mean,
                                         const char *const *names,
                                         const double *values,
                                         size_t n_params,
                                         int32_t time_origin,
                                         bool has_time_origin,
                                         double log_likelihood,
                                         struct EbmonModel **out_model);

/**
 * Log-likelihood, both AIC conventions and the parameter count. Any output
 * may be NULL.
 *
 * # Safety
 * `model` must be a live handle; non-null outputs must be writable.
 */
enum EbmonStatus ebmon_model_fit_stats(const struct EbmonModel *model,
                                       double *log_likelihood,
                                       double *aic,
                                       double *aic_textbook,
                                       size_t *n_params);

/**
 * Mean (`n_years`) and row-major covariance (`n_years^2`) of the true
 * effects. Either output may be NULL.
 *
 * # Safety
 * Non-null outputs must hold the documented number of doubles.
 */
enum EbmonStatus ebmon_model_moments(const struct EbmonModel *model,
                                     size_t n_years,
                                     double *mean,
                                     double *cov);

/**
 * Looks up a named structure parameter.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `value` writable.
 */
enum EbmonStatus ebmon_model_param(const struct EbmonModel *model, const char *name, double *value);

/**
 * Next-year mean and variance under `policy` (`carry`, `trend` or
 * `manual=<v>`).
 *
 * # Safety
 * `policy` must be a NUL-terminated string; outputs writable.
 */
enum EbmonStatus ebmon_model_extrapolate(const struct EbmonModel *model,
                                         const char *policy,
                                         double *mu_next,
                                         double *tau2_next);

/**
 * Predictive mean and variance of next year's effect for one centre whose
 * crude effects (NaN when missing) are aligned with the model's years.
 *
 * # Safety
 * `theta_hat` and `s2` must point to `n_years` doubles; outputs writable.
 */
enum EbmonStatus ebmon_model_predict(const struct EbmonModel *model,
                                     const char *policy,
                                     const double *theta_hat,
                                     const double *s2,
                                     size_t n_years,
                                     double *mean,
                                     double *variance);

/**
 * # Safety
 * `model` must be a handle from this library (or NULL) and not be used
 * afterwards.
 */
void ebmon_model_free(struct EbmonModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EBMON_H */
