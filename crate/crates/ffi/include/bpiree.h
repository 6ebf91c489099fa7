#ifndef BPIREE_H
#define BPIREE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Return codes of every fallible function.
 */
typedef enum BpireeErrorCode {
  BPIREE_ERROR_CODE_OK = 0,
  BPIREE_ERROR_CODE_NULL_POINTER = 1,
  BPIREE_ERROR_CODE_INVALID_ARGUMENT = 2,
  BPIREE_ERROR_CODE_PARSE = 3,
  BPIREE_ERROR_CODE_IO = 4,
  BPIREE_ERROR_CODE_NUMERICAL = 5,
  BPIREE_ERROR_CODE_UNSUPPORTED = 6,
  BPIREE_ERROR_CODE_BUFFER_TOO_SMALL = 7,
  BPIREE_ERROR_CODE_PANIC = 8,
} BpireeErrorCode;

/**
 * Penalty family for [`bpiree_problem_new_least_squares`].
 */
typedef enum BpireePenaltyKind {
  /**
   * `λ Σ log(1 + |x_j|/ε̄)`; `param` is `ε̄`.
   */
  BPIREE_PENALTY_KIND_LOG = 0,
  /**
   * `λ Σ (|x_j| + ε_j²)^p`; `param` is `p`.
   */
  BPIREE_PENALTY_KIND_SMOOTHED_LP = 1,
} BpireePenaltyKind;

/**
 * Termination status of a solver run.
 */
typedef enum BpireeSolveStatus {
  BPIREE_SOLVE_STATUS_CONVERGED = 0,
  BPIREE_SOLVE_STATUS_MAX_ITER = 1,
  BPIREE_SOLVE_STATUS_NUMERICAL_FAILURE = 2,
} BpireeSolveStatus;

/**
 * Opaque problem handle.
 */
typedef struct BpireeProblem BpireeProblem;

/**
 * Opaque result handle.
 */
typedef struct BpireeResult BpireeResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next bpiree call on the same thread.
 */
const char *bpiree_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bpiree_version(void);

/**
 * Parse a problem from instance JSON. Blob paths resolve against `base_dir`
 * (NULL means the current directory).
 *
 * # Safety
 * `json` and a non-NULL `base_dir` must be NUL-terminated strings; `out`
 * must point to writable storage for one pointer.
 */
enum BpireeErrorCode bpiree_problem_from_json(const char *json,
                                              const char *base_dir,
                                              struct BpireeProblem **out);

/**
 * Load a problem from an instance JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum BpireeErrorCode bpiree_problem_load(const char *path, struct BpireeProblem **out);

/**
 * Build `½‖Ax − b‖² + penalty` from raw arrays, with `num_blocks` contiguous
 * blocks. `a` is `rows × cols` row-major, `b` has `rows` entries.
 *
 * # Safety
 * `a` must hold `rows * cols` doubles, `b` must hold `rows` doubles and
 * `out` must be writable.
 */
enum BpireeErrorCode bpiree_problem_new_least_squares(const double *a,
                                                      size_t rows,
                                                      size_t cols,
                                                      const double *b,
                                                      size_t num_blocks,
                                                      enum BpireePenaltyKind penalty,
                                                      double lambda,
                                                      double param,
                                                      struct BpireeProblem **out);

/**
 * Number of unknowns, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t bpiree_problem_dim(const struct BpireeProblem *problem);

/**
 * Number of blocks, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t bpiree_problem_num_blocks(const struct BpireeProblem *problem);

/**
 * Evaluate the objective at `x`. Smoothed ℓp problems need `eps` (same
 * length as `x`); other penalties ignore it and accept NULL.
 *
 * # Safety
 * `x` must hold `len` doubles; a non-NULL `eps` must hold `len` doubles;
 * `out` must be writable.
 */
enum BpireeErrorCode bpiree_problem_objective(const struct BpireeProblem *problem,
                                              const double *x,
                                              const double *eps,
                                              size_t len,
                                              double *out);

/**
 * # Safety
 * `problem` must be NULL or a handle not yet freed.
 */
void bpiree_problem_free(struct BpireeProblem *problem);

/**
 * Run the solver named `algo` ("bpiree", "bpiree-lp", "pire", "pire-ps",
 * "pire-au", "irl1", "irl1e1"). `config_json` holds solver settings (NULL
 * for defaults); `x0` may be NULL to start from the origin.
 *
 * # Safety
 * `algo` and a non-NULL `config_json` must be NUL-terminated; a non-NULL
 * `x0` must hold `x0_len` doubles; `out` must be writable.
 */
enum BpireeErrorCode bpiree_solve(const struct BpireeProblem *problem,
                                  const char *algo,
                                  const char *config_json,
                                  const double *x0,
                                  size_t x0_len,
                                  struct BpireeResult **out);

/**
 * # Safety
 * `result` must be NULL or a live handle. NULL reports a numerical failure.
 */
enum BpireeSolveStatus bpiree_result_status(const struct BpireeResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
size_t bpiree_result_iterations(const struct BpireeResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
double bpiree_result_objective(const struct BpireeResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
double bpiree_result_rel_step(const struct BpireeResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
double bpiree_result_residual(const struct BpireeResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
size_t bpiree_result_dim(const struct BpireeResult *result);

/**
 * Copy the final point into `buf`, which must hold at least
 * `bpiree_result_dim(result)` doubles.
 *
 * # Safety
 * `buf` must be writable for `len` doubles.
 */
enum BpireeErrorCode bpiree_result_copy_x(const struct BpireeResult *result,
                                          double *buf,
                                          size_t len);

/**
 * # Safety
 * `result` must be NULL or a handle not yet freed.
 */
void bpiree_result_free(struct BpireeResult *result);

/**
 * Soft threshold `argmin_x τ|x| + ½(x − v)²`.
 *
 * # Safety
 * `out` must be writable.
 */
enum BpireeErrorCode bpiree_prox_weighted_abs(double v, double tau, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BPIREE_H */
