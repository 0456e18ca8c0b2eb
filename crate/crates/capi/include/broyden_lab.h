#ifndef BROYDEN_LAB_H
#define BROYDEN_LAB_H

/* Generated by cbindgen from the broyden-lab-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible `br_*` call.
typedef enum BrCode {
  // Success.
  BR_CODE_OK = 0,
  // A pointer argument that must not be NULL was NULL.
  BR_CODE_NULL_POINTER = 1,
  // An argument value was rejected (bad enum tag, bad length, NaN, …).
  BR_CODE_INVALID_ARGUMENT = 2,
  // Problem construction or solver preparation failed numerically.
  BR_CODE_NUMERIC = 3,
  // An index was out of range.
  BR_CODE_OUT_OF_RANGE = 4,
  // The callee panicked; state is unchanged. See `br_last_error_message`.
  BR_CODE_PANIC = 5,
} BrCode;

// Method selector for [`br_config_set_method`].
typedef enum BrMethod {
  BR_METHOD_NEWTON = 0,
  BR_METHOD_CLASSICAL = 1,
  BR_METHOD_BAD = 2,
  BR_METHOD_GREEDY = 3,
  BR_METHOD_RANDOM = 4,
} BrMethod;

// Direction rule for the random method.
typedef enum BrDirection {
  // Uniformly random standard basis vector.
  BR_DIRECTION_BASIS = 0,
  // Uniform draw from the unit sphere.
  BR_DIRECTION_SPHERE = 1,
  // Standard normal vector.
  BR_DIRECTION_GAUSSIAN = 2,
} BrDirection;

// Initialization scheme for the approximate Jacobian.
typedef enum BrInit {
  // `B0 = J(x0)`; `scale` is ignored.
  BR_INIT_EXACT_J0 = 0,
  // `B0 = scale * I`.
  BR_INIT_SCALED_IDENTITY = 1,
  // `B0 = scale * J(x0)`.
  BR_INIT_SCALED_J0 = 2,
  // `B0 = scale * J(x*)` (requires a stored root).
  BR_INIT_SCALED_JSTAR = 3,
} BrInit;

// Start-point distribution for [`br_sample_start`].
typedef enum BrStart {
  // Uniform on the unit sphere.
  BR_START_SPHERE = 0,
  // Standard normal entries.
  BR_START_NORMAL = 1,
  // `x* + rho * max(norm(x*), 1) * eps` near the stored root.
  BR_START_NEAR_SOLUTION = 2,
} BrStart;

// Terminal state of a solve, mirrored from the solver.
typedef enum BrSolveStatus {
  BR_SOLVE_STATUS_CONVERGED = 0,
  BR_SOLVE_STATUS_MAX_ITERS = 2,
  BR_SOLVE_STATUS_DEGENERATE = 3,
  BR_SOLVE_STATUS_DOMAIN_ERROR = 4,
} BrSolveStatus;

// Opaque solver configuration.
typedef struct BrConfig BrConfig;

// Opaque problem instance.
typedef struct BrProblem BrProblem;

// Opaque iteration trace.
typedef struct BrTrace BrTrace;

// One iteration record. Optional fields are NaN when absent;
// `direction_index` is -1 when absent.
typedef struct BrTraceRow {
  size_t k;
  double res_norm;
  double r_k;
  double sigma_abs;
  double sigma_rel;
  int64_t direction_index;
  double step_norm;
} BrTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a seeded diagonally dominant linear system of size `n`.
//
// # Safety
// `out` must be a valid pointer to a `BrProblem*` slot.
enum BrCode br_problem_linear(size_t n, uint64_t seed, struct BrProblem **out);

// Creates the regularized softmax gradient system (`m` terms, strength
// `gamma`).
//
// # Safety
// `out` must be a valid pointer to a `BrProblem*` slot.
enum BrCode br_problem_logsumexp(size_t n,
                                 uint64_t seed,
                                 size_t m,
                                 double gamma,
                                 struct BrProblem **out);

// Creates the discretized Chandrasekhar integral equation (`n` nodes,
// kernel constant `c` in (0, 1]).
//
// # Safety
// `out` must be a valid pointer to a `BrProblem*` slot.
enum BrCode br_problem_hequation(size_t n, uint64_t seed, double c, struct BrProblem **out);

// Writes the problem dimension to `dim_out`.
//
// # Safety
// `problem` must be a live handle; `dim_out` must be valid for writes.
enum BrCode br_problem_dim(const struct BrProblem *problem, size_t *dim_out);

// Releases a problem handle. NULL is a no-op.
//
// # Safety
// `problem` must be NULL or a handle not freed before.
void br_problem_free(struct BrProblem *problem);

// Creates a configuration with library defaults (classical method, exact
// start-point Jacobian, residual tolerance 1e-12, 500 iterations, seed 0).
//
// # Safety
// `out` must be a valid pointer to a `BrConfig*` slot.
enum BrCode br_config_new(struct BrConfig **out);

// Selects the iteration method.
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_method(struct BrConfig *config, enum BrMethod method);

// Selects the direction rule used by the random method.
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_direction(struct BrConfig *config, enum BrDirection direction);

// Selects the initialization scheme; `scale` applies to the scaled
// variants and must be finite.
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_init(struct BrConfig *config, enum BrInit init, double scale);

// Sets the residual-norm convergence threshold (must be positive).
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_tol(struct BrConfig *config, double tol);

// Sets the iteration cap.
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_max_iters(struct BrConfig *config, size_t max_iters);

// Sets the master seed for the direction stream.
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_seed(struct BrConfig *config, uint64_t seed);

// Enables or disables per-iteration Jacobian-gap recording.
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_record_sigma(struct BrConfig *config, bool on);

// Enables or disables per-iteration inverse-consistency tracking.
//
// # Safety
// `config` must be a live handle.
enum BrCode br_config_set_debug_checks(struct BrConfig *config, bool on);

// Releases a configuration handle. NULL is a no-op.
//
// # Safety
// `config` must be NULL or a handle not freed before.
void br_config_free(struct BrConfig *config);

// Samples a start point into `x0_out` (length `len` must equal the problem
// dimension). `rho` is used by the near-solution scheme only.
//
// # Safety
// `problem` must be a live handle; `x0_out` must be valid for `len` writes.
enum BrCode br_sample_start(const struct BrProblem *problem,
                            enum BrStart scheme,
                            double rho,
                            uint64_t seed,
                            double *x0_out,
                            size_t len);

// Runs the solver from `x0` (length `len` must equal the problem
// dimension) and returns a trace handle. The trace is produced even when
// the run ends degenerately; inspect `br_trace_status`.
//
// # Safety
// `problem` and `config` must be live handles; `x0` must be valid for
// `len` reads; `out` must be valid for writes.
enum BrCode br_solve(const struct BrProblem *problem,
                     const struct BrConfig *config,
                     const double *x0,
                     size_t len,
                     struct BrTrace **out);

// Terminal status of the traced run.
//
// # Safety
// `trace` must be a live handle.
enum BrSolveStatus br_trace_status(const struct BrTrace *trace);

// Number of recorded iteration rows.
//
// # Safety
// `trace` must be a live handle.
size_t br_trace_len(const struct BrTrace *trace);

// Copies row `index` into `row_out`.
//
// # Safety
// `trace` must be a live handle; `row_out` must be valid for writes.
enum BrCode br_trace_row(const struct BrTrace *trace, size_t index, struct BrTraceRow *row_out);

// Final residual norm of the run (NaN when no iterations were recorded).
//
// # Safety
// `trace` must be a live handle.
double br_trace_final_res_norm(const struct BrTrace *trace);

// Copies the final iterate into `x_out` (length `len` must equal the
// problem dimension). Fails with `OutOfRange` when the run terminated
// before producing one.
//
// # Safety
// `trace` must be a live handle; `x_out` must be valid for `len` writes.
enum BrCode br_trace_final_x(const struct BrTrace *trace, double *x_out, size_t len);

// Returns the trace as a heap-allocated CSV string (header + one line per
// iteration). Free it with [`br_string_free`]. NULL on failure.
//
// # Safety
// `trace` must be a live handle.
char *br_trace_csv(const struct BrTrace *trace);

// Returns the run metadata as a heap-allocated JSON string. Free it with
// [`br_string_free`]. NULL on failure.
//
// # Safety
// `trace` must be a live handle.
char *br_trace_meta_json(const struct BrTrace *trace);

// Releases a string returned by this library. NULL is a no-op.
//
// # Safety
// `s` must be NULL or a pointer obtained from `br_trace_csv` /
// `br_trace_meta_json`, not freed before.
void br_string_free(char *s);

// Releases a trace handle. NULL is a no-op.
//
// # Safety
// `trace` must be NULL or a handle not freed before.
void br_trace_free(struct BrTrace *trace);

// Detail message for the most recent failure on this thread, or NULL.
// The pointer is valid until the next `br_*` call on the same thread.
const char *br_last_error_message(void);

// Static, NUL-terminated library version string.
const char *br_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BROYDEN_LAB_H */
