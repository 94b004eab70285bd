#ifndef SBI_H
#define SBI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SbiStatus {
  SBI_STATUS_OK = 0,
  SBI_STATUS_NULL_POINTER = 1,
  SBI_STATUS_INVALID_ARGUMENT = 2,
  SBI_STATUS_CONFIG = 3,
  SBI_STATUS_NUMERICAL = 4,
  SBI_STATUS_IO = 5,
  SBI_STATUS_PANIC = 6,
} SbiStatus;

typedef enum SbiScheme {
  SBI_SCHEME_IMEX = 0,
  SBI_SCHEME_SIMEX = 1,
  SBI_SCHEME_RSBI = 2,
  SBI_SCHEME_SBGD = 3,
} SbiScheme;

/**
 * Opaque objective handle.
 */
typedef struct SbiObjective SbiObjective;

/**
 * Opaque swarm handle: state, parameters, objective and scheme.
 */
typedef struct SbiSwarm SbiSwarm;

/**
 * Plain-data swarm parameters. `beta` ≤ 0 or NaN selects `1/N`.
 */
typedef struct SbiSwarmParams {
  double friction;
  double weight;
  double kappa;
  double epsilon;
  double h;
  double p;
  bool conserve_mass;
  double tol_m;
  double tol_merge;
  double tol_res;
  double beta;
  size_t max_iter;
  bool lifecycle_enabled;
} SbiSwarmParams;

typedef struct SbiRunSummary {
  double best_f;
  size_t iterations;
  size_t fallback_iterations;
  size_t final_agents;
  bool converged;
  bool diverged;
} SbiRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sbi_last_error(void);

/**
 * Default swarm parameters.
 */
struct SbiSwarmParams sbi_swarm_params_default(void);

/**
 * Builds a registered benchmark (`rastrigin`, `rosenbrock`, …) of dimension `dim`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SbiStatus sbi_objective_new(const char *name, size_t dim, struct SbiObjective **out);

/**
 * # Safety
 * `obj` must come from [`sbi_objective_new`] and not be used afterwards.
 */
void sbi_objective_free(struct SbiObjective *obj);

/**
 * # Safety
 * `obj` must be a live handle; `out` must be writable.
 */
enum SbiStatus sbi_objective_dim(const struct SbiObjective *obj, size_t *out);

/**
 * Evaluates `F(x)`; `x` holds `len` values, which must equal the dimension.
 *
 * # Safety
 * `obj` must be a live handle, `x` readable for `len` values, `out` writable.
 */
enum SbiStatus sbi_objective_value(const struct SbiObjective *obj,
                                   const double *x,
                                   size_t len,
                                   double *out);

/**
 * Writes `∇F(x)` into `grad` (both of length `len`).
 *
 * # Safety
 * `obj` must be a live handle; `x` and `grad` must hold `len` values.
 */
enum SbiStatus sbi_objective_gradient(const struct SbiObjective *obj,
                                      const double *x,
                                      size_t len,
                                      double *grad);

/**
 * Creates a swarm of `n` agents with masses `1/n`. `x` and `v` are `n × dim`
 * row-major. The objective handle may be freed afterwards.
 *
 * # Safety
 * `obj` must be live, `params` readable, `x`/`v` readable for `n·dim`
 * values, `out` writable.
 */
enum SbiStatus sbi_swarm_new(const struct SbiObjective *obj,
                             const struct SbiSwarmParams *params,
                             enum SbiScheme scheme,
                             size_t n,
                             const double *x,
                             const double *v,
                             uint64_t seed,
                             struct SbiSwarm **out);

/**
 * # Safety
 * `swarm` must come from [`sbi_swarm_new`] and not be used afterwards.
 */
void sbi_swarm_free(struct SbiSwarm *swarm);

/**
 * Number of live agents (0 for a null handle).
 *
 * # Safety
 * `swarm` must be null or a live handle.
 */
size_t sbi_swarm_len(const struct SbiSwarm *swarm);

/**
 * One step of the configured scheme, without lifecycle management.
 *
 * # Safety
 * `swarm` must be a live handle.
 */
enum SbiStatus sbi_swarm_step(struct SbiSwarm *swarm);

/**
 * Copies agent `k` (in current order) into `x`, `v` (length `dim`), `m` and `f`.
 * Any output pointer may be null to skip it.
 *
 * # Safety
 * `swarm` must be live; non-null outputs must be writable (`x`, `v` for `dim` values).
 */
enum SbiStatus sbi_swarm_agent(const struct SbiSwarm *swarm,
                               size_t k,
                               double *x,
                               double *v,
                               double *m,
                               double *f);

/**
 * Runs to completion with lifecycle management. The swarm handle keeps the
 * final state; `best_x` (length `dim`, may be null) receives the answer.
 *
 * # Safety
 * `swarm` must be live; `summary` writable; `best_x` null or writable for `dim` values.
 */
enum SbiStatus sbi_swarm_run(struct SbiSwarm *swarm, struct SbiRunSummary *summary, double *best_x);

/**
 * Runs a batch described by a TOML experiment configuration and returns the
 * JSON report in `*json_out`, to be released with [`sbi_string_free`].
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `json_out` writable.
 */
enum SbiStatus sbi_batch_run(const char *toml, char **json_out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void sbi_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBI_H */
