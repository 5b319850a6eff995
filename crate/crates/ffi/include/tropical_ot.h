#ifndef TROPICAL_OT_H
#define TROPICAL_OT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TropStatus {
  TROP_STATUS_OK = 0,
  TROP_STATUS_NULL_POINTER = 1,
  TROP_STATUS_INVALID_ARGUMENT = 2,
  TROP_STATUS_DIMENSION_MISMATCH = 3,
  TROP_STATUS_INFEASIBLE = 4,
  TROP_STATUS_DEGENERATE = 5,
  TROP_STATUS_NO_ROOT = 6,
  TROP_STATUS_BUFFER_TOO_SMALL = 7,
  TROP_STATUS_IO = 8,
  TROP_STATUS_PANIC = 9,
} TropStatus;

/**
 * Opaque Wasserstein-1 result.
 */
typedef struct TropW1Solution TropW1Solution;

/**
 * Opaque Wasserstein-2 result.
 */
typedef struct TropW2Solution TropW2Solution;

/**
 * Solver parameters. Steps `<= 0` are derived from the operator norm.
 */
typedef struct TropSolverConfig {
  double tolerance;
  uint64_t max_iter;
  double primal_step;
  double dual_step;
  double step_safety;
  double step_balance;
  uint64_t time_slices;
  uint64_t seed;
  uint64_t power_iterations;
} TropSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length plus one,
 * or 0 when there is no message.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null with `len == 0`.
 */
size_t trop_last_error_message(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *trop_version(void);

/**
 * Tropical distance between two points of `n` coordinates.
 *
 * # Safety
 * `x` and `y` must hold `n` values; `result` must be writable.
 */
enum TropStatus trop_dist(const double *x, const double *y, size_t n, double *result);

/**
 * Tropical norm of a vector of `n` components.
 *
 * # Safety
 * `a` must hold `n` values; `result` must be writable.
 */
enum TropStatus trop_norm(const double *a, size_t n, double *result);

/**
 * Largest absolute subset sum of `b`.
 *
 * # Safety
 * `b` must hold `n` values; `result` must be writable.
 */
enum TropStatus trop_zeta(const double *b, size_t n, double *result);

/**
 * Hamiltonian `H(b)` for exponent `p`; `+inf` is written as `INFINITY`.
 *
 * # Safety
 * `b` must hold `n` values; `result` must be writable.
 */
enum TropStatus trop_hamiltonian(const double *b, size_t n, double p, double *result);

/**
 * Tropical shrink of `b` with step `h`, written to `result` (`n` values).
 *
 * # Safety
 * `b` and `result` must hold `n` values.
 */
enum TropStatus trop_shrink(const double *b, size_t n, double h, double *result);

/**
 * Minimizer of `(mu/2)||m||_tr^2 + |m - c|^2/2` for 2-D `c`.
 *
 * # Safety
 * `c` must hold 2 values; `result` must hold 2 values.
 */
enum TropStatus trop_flux_project(const double *c, double mu, double *result);

/**
 * Largest nonnegative root of `x^3 + a2 x^2 + a1 x + a0`.
 *
 * # Safety
 * `result` must be writable.
 */
enum TropStatus trop_root_pos_cubic(double a2, double a1, double a0, double *result);

/**
 * Defaults for the Wasserstein-1 solver.
 *
 * # Safety
 * `cfg` must be writable.
 */
enum TropStatus trop_config_default_w1(struct TropSolverConfig *cfg);

/**
 * Defaults for the Wasserstein-2 solver.
 *
 * # Safety
 * `cfg` must be writable.
 */
enum TropStatus trop_config_default_w2(struct TropSolverConfig *cfg);

/**
 * Solves the Wasserstein-1 problem between per-cell masses `q0`, `q1` on an
 * `nx x ny` grid of spacing `dx`. On success `*solution` owns a handle.
 *
 * # Safety
 * `q0`, `q1` must hold `nx * ny` values; `cfg` must be valid; `solution`
 * must be writable.
 */
enum TropStatus trop_w1_solve(size_t nx,
                              size_t ny,
                              double dx,
                              const double *q0,
                              const double *q1,
                              const struct TropSolverConfig *cfg,
                              struct TropW1Solution **solution);

/**
 * # Safety
 * `s` must come from [`trop_w1_solve`]; `result` must be writable.
 */
enum TropStatus trop_w1_distance(const struct TropW1Solution *s, double *result);

/**
 * Iteration count and convergence flag.
 *
 * # Safety
 * `s` must come from [`trop_w1_solve`]; outputs must be writable.
 */
enum TropStatus trop_w1_status(const struct TropW1Solution *s,
                               uint64_t *iterations,
                               bool *converged);

/**
 * Flux component `axis` (0 = x, 1 = y) in the cell-aligned layout: entry
 * `i` is the flux through the upper face of cell `i` along `axis`.
 *
 * # Safety
 * `s` must come from [`trop_w1_solve`]; `buf` must hold `len` values.
 */
enum TropStatus trop_w1_flux(const struct TropW1Solution *s, size_t axis, double *buf, size_t len);

/**
 * Dual potential, one value per cell.
 *
 * # Safety
 * `s` must come from [`trop_w1_solve`]; `buf` must hold `len` values.
 */
enum TropStatus trop_w1_potential(const struct TropW1Solution *s, double *buf, size_t len);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `s` must come from [`trop_w1_solve`] and not be used afterwards.
 */
void trop_w1_free(struct TropW1Solution *s);

/**
 * Solves the Wasserstein-2 problem with `cfg.time_slices` slices.
 *
 * # Safety
 * As for [`trop_w1_solve`].
 */
enum TropStatus trop_w2_solve(size_t nx,
                              size_t ny,
                              double dx,
                              const double *q0,
                              const double *q1,
                              const struct TropSolverConfig *cfg,
                              struct TropW2Solution **solution);

/**
 * # Safety
 * `s` must come from [`trop_w2_solve`]; `result` must be writable.
 */
enum TropStatus trop_w2_distance(const struct TropW2Solution *s, double *result);

/**
 * # Safety
 * `s` must come from [`trop_w2_solve`]; outputs must be writable.
 */
enum TropStatus trop_w2_status(const struct TropW2Solution *s,
                               uint64_t *iterations,
                               bool *converged);

/**
 * Number of time slices.
 *
 * # Safety
 * `s` must come from [`trop_w2_solve`]; `result` must be writable.
 */
enum TropStatus trop_w2_num_slices(const struct TropW2Solution *s, uint64_t *result);

/**
 * Per-cell masses of slice `n` (0-based, slice `n` at time `n / (nt - 1)`).
 *
 * # Safety
 * `s` must come from [`trop_w2_solve`]; `buf` must hold `len` values.
 */
enum TropStatus trop_w2_slice(const struct TropW2Solution *s, size_t n, double *buf, size_t len);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `s` must come from [`trop_w2_solve`] and not be used afterwards.
 */
void trop_w2_free(struct TropW2Solution *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TROPICAL_OT_H */
