#ifndef SCOREOPT_H
#define SCOREOPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ScoreoptStatus {
  SCOREOPT_STATUS_OK = 0,
  SCOREOPT_STATUS_NULL_POINTER = 1,
  SCOREOPT_STATUS_INVALID_ARGUMENT = 2,
  SCOREOPT_STATUS_CONFIG = 3,
  SCOREOPT_STATUS_UNKNOWN_PROBLEM = 4,
  SCOREOPT_STATUS_DIMENSION_MISMATCH = 5,
  /**
   * Non-finite values, degenerate kernels, singular scales or divergence.
   */
  SCOREOPT_STATUS_NUMERICAL = 6,
  SCOREOPT_STATUS_EMPTY_FEASIBLE = 7,
  /**
   * The run stopped early; partial results are still returned.
   */
  SCOREOPT_STATUS_ABORTED = 8,
  SCOREOPT_STATUS_IO = 9,
  SCOREOPT_STATUS_OUT_OF_RANGE = 10,
  SCOREOPT_STATUS_PANIC = 11,
} ScoreoptStatus;

/**
 * Resolved run configuration.
 */
typedef struct ScoreoptConfig ScoreoptConfig;

/**
 * Benchmark objective in native coordinates.
 */
typedef struct ScoreoptProblem ScoreoptProblem;

/**
 * Solutions of the last completed stage of a run.
 */
typedef struct ScoreoptResult ScoreoptResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *scoreopt_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *scoreopt_version(void);

/**
 * Config from TOML text plus `key.path=value` overrides.
 *
 * # Safety
 * `toml` must be a nul-terminated string; `overrides` must hold
 * `n_overrides` such strings; `out` must be writable.
 */
enum ScoreoptStatus scoreopt_config_from_toml(const char *toml,
                                              const char *const *overrides,
                                              size_t n_overrides,
                                              struct ScoreoptConfig **out);

/**
 * Config from a built-in preset (`fractal`, `fractal-mm`, `f4`, ...).
 *
 * # Safety
 * As for [`scoreopt_config_from_toml`].
 */
enum ScoreoptStatus scoreopt_config_from_preset(const char *name,
                                                const char *const *overrides,
                                                size_t n_overrides,
                                                struct ScoreoptConfig **out);

/**
 * Canonical TOML of the config; free with [`scoreopt_string_free`].
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum ScoreoptStatus scoreopt_config_to_toml(const struct ScoreoptConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void scoreopt_config_free(struct ScoreoptConfig *cfg);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void scoreopt_string_free(char *s);

/**
 * Runs every stage of the config with `seed` (the config's own seed is
 * ignored). On `Aborted` the result of the last completed stage, if any, is
 * still stored in `out`; otherwise `out` is set to null.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum ScoreoptStatus scoreopt_run(const struct ScoreoptConfig *cfg,
                                 uint64_t seed,
                                 struct ScoreoptResult **out);

/**
 * # Safety
 * `res` must be a live result handle.
 */
size_t scoreopt_result_dim(const struct ScoreoptResult *res);

/**
 * Number of solutions, best first.
 *
 * # Safety
 * `res` must be a live result handle.
 */
size_t scoreopt_result_len(const struct ScoreoptResult *res);

/**
 * Number of completed stages.
 *
 * # Safety
 * `res` must be a live result handle.
 */
size_t scoreopt_result_stages(const struct ScoreoptResult *res);

/**
 * Copies solution `index` (native coordinates) into `x[0..len]`; `len` must
 * equal the dimension. The objective is NaN for infeasible points. `objective`
 * and `feasible` may be null.
 *
 * # Safety
 * `res` must be a live result handle; `x` must hold `len` doubles.
 */
enum ScoreoptStatus scoreopt_result_solution(const struct ScoreoptResult *res,
                                             size_t index,
                                             double *x,
                                             size_t len,
                                             double *objective,
                                             bool *feasible);

/**
 * # Safety
 * `res` must be null or a handle not yet freed.
 */
void scoreopt_result_free(struct ScoreoptResult *res);

/**
 * Registered problem by id; `dim` 0 keeps the default dimension.
 *
 * # Safety
 * `id` must be a nul-terminated string; `out` must be writable.
 */
enum ScoreoptStatus scoreopt_problem_new(const char *id, size_t dim, struct ScoreoptProblem **out);

/**
 * # Safety
 * `p` must be a live problem handle.
 */
size_t scoreopt_problem_dim(const struct ScoreoptProblem *p);

/**
 * Copies the native box into `lower[0..len]` and `upper[0..len]`.
 *
 * # Safety
 * `p` must be a live problem handle; `lower` and `upper` must hold `len` doubles.
 */
enum ScoreoptStatus scoreopt_problem_bounds(const struct ScoreoptProblem *p,
                                            double *lower,
                                            double *upper,
                                            size_t len);

/**
 * Raw objective at native `x[0..len]`; `feasible` (nullable) reports the
 * constraint predicate.
 *
 * # Safety
 * `p` must be a live problem handle; `x` must hold `len` doubles; `value`
 * must be writable.
 */
enum ScoreoptStatus scoreopt_problem_objective(const struct ScoreoptProblem *p,
                                               const double *x,
                                               size_t len,
                                               double *value,
                                               bool *feasible);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void scoreopt_problem_free(struct ScoreoptProblem *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCOREOPT_H */
