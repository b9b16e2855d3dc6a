#ifndef NASHLEARN_H
#define NASHLEARN_H

#pragma once

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  NL_STATUS_OK = 0,
  NL_STATUS_NULL_POINTER = 1,
  NL_STATUS_INVALID_ARGUMENT = 2,
  NL_STATUS_DIMENSION = 3,
  NL_STATUS_EVALUATION = 4,
  NL_STATUS_DOMAIN = 5,
  NL_STATUS_CONDITIONING = 6,
  NL_STATUS_NOT_CONVERGED = 7,
  NL_STATUS_UNSTABLE = 8,
  NL_STATUS_NUMERICAL = 9,
  NL_STATUS_SIMULATION = 10,
  NL_STATUS_CONFIG = 11,
  NL_STATUS_IO = 12,
  NL_STATUS_BUFFER_TOO_SMALL = 13,
  NL_STATUS_PANIC = 14,
} NlStatus;

/**
 * Step-size schedule kinds for [`nl_simulate_stochastic`].
 */
typedef enum {
  /**
   * `1/(1+k)`.
   */
  NL_SCHEDULE_KIND_INVERSE = 0,
  /**
   * `1/(1+k ln(k+1))`.
   */
  NL_SCHEDULE_KIND_INVERSE_LOG = 1,
  /**
   * Fixed value taken from the matching `params` entry.
   */
  NL_SCHEDULE_KIND_CONSTANT = 2,
} NlScheduleKind;

/**
 * Opaque game handle.
 */
typedef struct NlGame NlGame;

/**
 * Opaque LQ game handle.
 */
typedef struct NlLqGame NlLqGame;

/**
 * Opaque trajectory handle.
 */
typedef struct NlTrajectory NlTrajectory;

/**
 * Callback evaluating player `player`'s cost at `x` (length `dim`);
 * returns 0 on success.
 */
typedef int (*NlCostFn)(void *user, size_t player, const double *x, size_t dim, double *cost);

/**
 * Callback writing the game form at `x` into `out` (both length `dim`);
 * returns 0 on success.
 */
typedef int (*NlGameFormFn)(void *user, const double *x, size_t dim, double *out);

typedef struct {
  double omega_norm;
  bool is_critical;
  bool is_differential_nash;
  bool is_stable;
} NlClassification;

typedef struct {
  double alpha;
  double beta;
  double uniform_rate;
  double contraction_factor;
  double min_symmetric_eig;
} NlSpectralBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after success.
 * The pointer stays valid until the next call on this thread.
 */
const char *nl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nl_version(void);

/**
 * Benchmark game by id: "lq3", "pennies", "torus" or "particles".
 *
 * # Safety
 * `id` must be a NUL-terminated string; `out` must be writable.
 */
NlStatus nl_game_by_id(const char *id, NlGame **out);

/**
 * Two-player location game on the torus.
 */
NlGame *nl_game_torus(void);

/**
 * Smoothed matching pennies.
 */
NlGame *nl_game_pennies(void);

/**
 * Four-particle collision avoidance with the given horizon (>= 1).
 */
NlGame *nl_game_particles(size_t horizon);

/**
 * Quadratic game with game form `ω(x) = M x + b`: player `i` has cost
 * `½ x_iᵀ M_ii x_i + Σ_{j≠i} x_iᵀ M_ij x_j + b_iᵀ x_i`. Diagonal blocks
 * `M_ii` must be symmetric. `m` is `dim × dim` row-major.
 *
 * # Safety
 * `dims` has `num_players` entries, `m` has `dim²` and `b` has `dim`.
 */
NlStatus nl_game_quadratic(size_t num_players,
                           const size_t *dims,
                           const double *m,
                           const double *b,
                           NlGame **out);

/**
 * Game defined by C callbacks. `form` may be null, in which case gradients
 * come from central differences of `cost`. The callbacks may be invoked from
 * several threads at once and must be thread-safe for `user`.
 *
 * # Safety
 * `dims` has `num_players` entries; `user` must outlive the game.
 */
NlStatus nl_game_from_callbacks(size_t num_players,
                                const size_t *dims,
                                NlCostFn cost,
                                NlGameFormFn form,
                                void *user,
                                NlGame **out);

/**
 * Release a game handle; null is ignored.
 *
 * # Safety
 * `game` must come from this library and not be used afterwards.
 */
void nl_game_free(NlGame *game);

/**
 * Joint dimension, or 0 for a null handle.
 *
 * # Safety
 * `game` must be null or a live handle.
 */
size_t nl_game_dim(const NlGame *game);

/**
 * Number of players, or 0 for a null handle.
 *
 * # Safety
 * `game` must be null or a live handle.
 */
size_t nl_game_num_players(const NlGame *game);

/**
 * Game form `ω(x)` into `out` (length >= dim).
 *
 * # Safety
 * `x` has `dim` entries and `out` has `out_len`.
 */
NlStatus nl_game_form(const NlGame *game, const double *x, size_t dim, double *out, size_t out_len);

/**
 * Game Jacobian at `x`, row-major into `out` (length >= dim²).
 *
 * # Safety
 * `x` has `dim` entries and `out` has `out_len`.
 */
NlStatus nl_game_jacobian(const NlGame *game,
                          const double *x,
                          size_t dim,
                          double *out,
                          size_t out_len);

/**
 * Classify `x` as critical / differential Nash / stable with tolerance `tol`.
 *
 * # Safety
 * `x` has `dim` entries; `out` must be writable.
 */
NlStatus nl_classify(const NlGame *game,
                     const double *x,
                     size_t dim,
                     double tol,
                     NlClassification *out);

/**
 * Newton iteration on `ω = 0` from `x0`; the refined point goes to `out`.
 *
 * # Safety
 * `x0` has `dim` entries and `out` has `out_len`.
 */
NlStatus nl_newton_refine(const NlGame *game,
                          const double *x0,
                          size_t dim,
                          size_t max_iters,
                          double tol,
                          double *out,
                          size_t out_len);

/**
 * Largest uniform step keeping gradient play locally stable at `x`.
 * `*present` is false when some Jacobian eigenvalue has non-positive real
 * part (no such step exists).
 *
 * # Safety
 * `x` has `dim` entries; `rate` and `present` must be writable.
 */
NlStatus nl_uniform_rate_interval(const NlGame *game,
                                  const double *x,
                                  size_t dim,
                                  double *rate,
                                  bool *present);

/**
 * Spectral constants over the ball of radius `r` around `center` from
 * `samples` seeded draws plus the center.
 *
 * # Safety
 * `center` has `dim` entries; `out` must be writable.
 */
NlStatus nl_spectral_bounds(const NlGame *game,
                            const double *center,
                            size_t dim,
                            double r,
                            size_t samples,
                            uint64_t seed,
                            NlSpectralBounds *out);

/**
 * `⌈2(β/α) ln(r/ε)⌉`.
 *
 * # Safety
 * `out` must be writable.
 */
NlStatus nl_iteration_bound_uniform(double alpha, double beta, double r, double eps, uint64_t *out);

/**
 * Deterministic gradient play with constant per-player `rates`. `stride` 0
 * selects the default thinning.
 *
 * # Safety
 * `x0` has `dim` entries, `rates` has `num_rates`; `out` must be writable.
 */
NlStatus nl_simulate_deterministic(const NlGame *game,
                                   const double *x0,
                                   size_t dim,
                                   const double *rates,
                                   size_t num_rates,
                                   double stop_tol,
                                   size_t max_iters,
                                   size_t stride,
                                   NlTrajectory **out);

/**
 * Noisy gradient play with per-player schedules and Gaussian noise of
 * per-player scale `sigma`, seeded by `seed`.
 *
 * # Safety
 * `x0` has `dim` entries; `kinds`, `params` and `sigma` have `num_players`
 * entries; `out` must be writable.
 */
NlStatus nl_simulate_stochastic(const NlGame *game,
                                const double *x0,
                                size_t dim,
                                const NlScheduleKind *kinds,
                                const double *params,
                                const double *sigma,
                                size_t num_players,
                                double stop_tol,
                                size_t max_iters,
                                size_t stride,
                                uint64_t seed,
                                NlTrajectory **out);

/**
 * Release a trajectory; null is ignored.
 *
 * # Safety
 * `traj` must come from this library and not be used afterwards.
 */
void nl_trajectory_free(NlTrajectory *traj);

/**
 * Number of stored points (0 for null).
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t nl_trajectory_len(const NlTrajectory *traj);

/**
 * Updates performed (0 for null).
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t nl_trajectory_iters(const NlTrajectory *traj);

/**
 * 0 converged, 1 iteration cap reached, 2 diverged, -1 null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
int nl_trajectory_status(const NlTrajectory *traj);

/**
 * Stored point `index` into `out`, with its iteration number in `*iter`
 * when `iter` is not null.
 *
 * # Safety
 * `out` has `out_len` entries; `iter` is null or writable.
 */
NlStatus nl_trajectory_point(const NlTrajectory *traj,
                             size_t index,
                             double *out,
                             size_t out_len,
                             size_t *iter);

/**
 * `‖ω‖` at every stored point into `out` (length >= len).
 *
 * # Safety
 * `out` has `out_len` entries.
 */
NlStatus nl_trajectory_omega_norms(const NlTrajectory *traj, double *out, size_t out_len);

/**
 * LQ game from its JSON description (`A`, `B`, `Q`, `R`, `Sigma0` as
 * row-major nested arrays).
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
NlStatus nl_lq_game_from_json(const char *json, NlLqGame **out);

/**
 * The bundled three-player benchmark; `calibrated` selects the calibrated
 * initial-state second moment instead of the identity.
 */
NlLqGame *nl_lq_benchmark(bool calibrated);

/**
 * Release an LQ game; null is ignored.
 *
 * # Safety
 * `lq` must come from this library and not be used afterwards.
 */
void nl_lq_free(NlLqGame *lq);

/**
 * Total number of gain entries (sum of input dims times state dim).
 *
 * # Safety
 * `lq` must be null or a live handle.
 */
size_t nl_lq_gain_len(const NlLqGame *lq);

/**
 * Feedback Nash gains by the coupled Riccati iteration, flattened per
 * player in row-major order.
 *
 * # Safety
 * `out` has `out_len` entries.
 */
NlStatus nl_lq_nash(const NlLqGame *lq, double tol, size_t max_iters, double *out, size_t out_len);

/**
 * The LQ game as a game over flattened gains with the policy gradient as
 * game form.
 *
 * # Safety
 * `lq` must be a live handle; `out` must be writable.
 */
NlStatus nl_lq_as_game(const NlLqGame *lq, NlGame **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NASHLEARN_H */
