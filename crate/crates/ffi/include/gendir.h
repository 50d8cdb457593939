#ifndef GENDIR_H
#define GENDIR_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GendirStatus {
  GENDIR_STATUS_OK = 0,
  GENDIR_STATUS_NULL_POINTER = 1,
  GENDIR_STATUS_INVALID_ARGUMENT = 2,
  GENDIR_STATUS_VALIDATION_FAILED = 3,
  GENDIR_STATUS_NUMERICAL = 4,
  GENDIR_STATUS_PANIC = 5,
} GendirStatus;

/**
 * Which coefficient field to evaluate at a point.
 */
typedef enum GendirField {
  GENDIR_FIELD_DRIFT = 0,
  GENDIR_FIELD_DIFFUSION = 1,
  GENDIR_FIELD_POTENTIAL_RESIDUAL = 2,
} GendirField;

/**
 * SDE coefficients `(b, S, kappa, c)`.
 */
typedef struct GendirCoefficients GendirCoefficients;

/**
 * Generalized Dirichlet parameters `(alpha, beta)`.
 */
typedef struct GendirParams GendirParams;

/**
 * Result of an ensemble simulation.
 */
typedef struct GendirSimulation GendirSimulation;

/**
 * Integrator settings for [`gendir_simulate`].
 */
typedef struct GendirIntegratorOptions {
  double dt;
  double t_end;
  size_t particles;
  uint64_t seed;
  /**
   * Steps between moment records.
   */
  uint64_t record_stride;
  uint32_t boundary_retries;
  /**
   * Worker threads; 0 selects all cores. Results do not depend on it.
   */
  size_t threads;
} GendirIntegratorOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *gendir_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gendir_version(void);

/**
 * Creates parameters from `k` values each of `alpha` and `beta`.
 *
 * # Safety
 * `alpha` and `beta` must be valid for `k` reads; `out` must be writable.
 */
enum GendirStatus gendir_params_new(const double *alpha,
                                    const double *beta,
                                    size_t k,
                                    struct GendirParams **out);

/**
 * # Safety
 * `p` must be null or a handle from this library that has not been freed.
 */
void gendir_params_free(struct GendirParams *p);

/**
 * Number of free components `K`, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t gendir_params_dim(const struct GendirParams *p);

/**
 * Writes the `K` means and the row-major `K x K` covariance.
 *
 * # Safety
 * `mean` must hold `K` and `cov` `K * K` doubles.
 */
enum GendirStatus gendir_params_moments(const struct GendirParams *p, double *mean, double *cov);

/**
 * Log-density at `y` (length `K`). `on_boundary` may be null.
 *
 * # Safety
 * `y` must hold `k` doubles; `value` must be writable.
 */
enum GendirStatus gendir_params_log_density(const struct GendirParams *p,
                                            const double *y,
                                            size_t k,
                                            double *value,
                                            bool *on_boundary);

/**
 * Creates coefficients for `k` components. `c` holds the `(k-1) x (k-1)`
 * row-major coupling matrix whose strict lower triangle must be zero; it may
 * be null when `k == 1`. The coefficients are not validated here.
 *
 * # Safety
 * Arrays must be valid for the stated lengths; `out` must be writable.
 */
enum GendirStatus gendir_coefficients_new(const double *b,
                                          const double *s,
                                          const double *kappa,
                                          const double *c,
                                          size_t k,
                                          struct GendirCoefficients **out);

/**
 * # Safety
 * `c` must be null or a handle from this library that has not been freed.
 */
void gendir_coefficients_free(struct GendirCoefficients *c);

/**
 * Checks bounds and the chained equalities that make the invariant a
 * generalized Dirichlet distribution.
 *
 * # Safety
 * `c` must be null or a live handle.
 */
enum GendirStatus gendir_coefficients_validate(const struct GendirCoefficients *c);

/**
 * Invariant distribution of the coefficients.
 *
 * # Safety
 * `c` must be a live handle and `out` writable.
 */
enum GendirStatus gendir_sde_to_distribution(const struct GendirCoefficients *c,
                                             struct GendirParams **out);

/**
 * Coefficients with invariant `p` for the chosen `kappa` (length `K`).
 *
 * # Safety
 * `p` must be a live handle, `kappa` valid for `K` reads and `out` writable.
 */
enum GendirStatus gendir_distribution_to_sde(const struct GendirParams *p,
                                             const double *kappa,
                                             struct GendirCoefficients **out);

/**
 * Evaluates drift, diagonal diffusion or the potential residual at `y`,
 * writing `k` values to `out`.
 *
 * # Safety
 * `y` and `out` must be valid for `k` doubles.
 */
enum GendirStatus gendir_evaluate(const struct GendirCoefficients *c,
                                  enum GendirField field,
                                  const double *y,
                                  size_t k,
                                  double *out);

/**
 * Default integrator settings.
 */
struct GendirIntegratorOptions gendir_integrator_defaults(void);

/**
 * Simulates the ensemble from the point `y0` (length `K`).
 *
 * # Safety
 * `c` must be a live handle, `y0` valid for `K` reads and `out` writable.
 */
enum GendirStatus gendir_simulate(const struct GendirCoefficients *c,
                                  struct GendirIntegratorOptions options,
                                  const double *y0,
                                  struct GendirSimulation **out);

/**
 * # Safety
 * `s` must be null or a handle from this library that has not been freed.
 */
void gendir_simulation_free(struct GendirSimulation *s);

/**
 * Number of moment records, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t gendir_simulation_records(const struct GendirSimulation *s);

/**
 * Number of particles that were projected back after exhausting the retries.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
uint64_t gendir_simulation_clamped(const struct GendirSimulation *s);

/**
 * Copies record `index`: its time, the `N = K + 1` means and the row-major
 * `N x N` covariance (NaN when fewer than two particles were simulated).
 *
 * # Safety
 * `t` must be writable, `mean` hold `N` and `cov` `N * N` doubles.
 */
enum GendirStatus gendir_simulation_record(const struct GendirSimulation *s,
                                           size_t index,
                                           double *t,
                                           double *mean,
                                           double *cov);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENDIR_H */
