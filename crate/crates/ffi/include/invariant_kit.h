#ifndef INVARIANT_KIT_H
#define INVARIANT_KIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every function of the C API.
typedef enum IkStatus {
  IK_STATUS_OK = 0,
  IK_STATUS_NULL_POINTER = 1,
  IK_STATUS_INVALID_UTF8 = 2,
  IK_STATUS_PARSE = 3,
  IK_STATUS_DOMAIN = 4,
  IK_STATUS_DIMENSION = 5,
  IK_STATUS_INVALID_ARGUMENT = 6,
  IK_STATUS_CONFIG = 7,
  IK_STATUS_NUMERICAL = 8,
  IK_STATUS_IO = 9,
  IK_STATUS_PANIC = 10,
} IkStatus;

// A control-barrier problem built from a config document.
typedef struct IkControlProblem IkControlProblem;

// A parsed scalar expression.
typedef struct IkExpr IkExpr;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next API call on the same thread.
const char *ik_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ik_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void ik_string_free(char *s);

// Parses `source` over the `n_vars` variable names in `vars`.
//
// # Safety
// `source` and each of `vars[0..n_vars]` must be NUL-terminated strings;
// `out_expr` must be writable.
enum IkStatus ik_expr_parse(const char *source,
                            const char *const *vars,
                            size_t n_vars,
                            struct IkExpr **out_expr);

// Number of variables of a parsed expression (0 for null).
//
// # Safety
// `expr` must be null or a live handle.
size_t ik_expr_arity(const struct IkExpr *expr);

// Evaluates the expression at `point[0..n]`.
//
// # Safety
// `expr` must be a live handle, `point` readable for `n` values and
// `out_value` writable.
enum IkStatus ik_expr_eval(const struct IkExpr *expr,
                           const double *point,
                           size_t n,
                           double *out_value);

// Gradient at `point[0..n]` into `out_grad[0..n]`. `out_kink` (optional)
// is set when the point sits on a kink of abs/min/max/ifpos, in which case
// the components are one-sided derivatives.
//
// # Safety
// `expr` must be a live handle; `point` readable and `out_grad` writable
// for `n` values; `out_kink` null or writable.
enum IkStatus ik_expr_grad(const struct IkExpr *expr,
                           const double *point,
                           size_t n,
                           double *out_grad,
                           bool *out_kink);

// Canonical printed form; release with [`ik_string_free`].
//
// # Safety
// `expr` must be a live handle and `out_text` writable.
enum IkStatus ik_expr_print(const struct IkExpr *expr, char **out_text);

// Releases an expression handle. Null is ignored.
//
// # Safety
// `expr` must come from [`ik_expr_parse`] and not have been freed.
void ik_expr_free(struct IkExpr *expr);

// Classifies μ(w) given as an expression in `w`. `out_exit_code` receives
// 0 (minimal), 1 (not minimal) or 2 (inconclusive); `out_json` (optional)
// the verdict with its evidence.
//
// # Safety
// `source` must be a NUL-terminated string; `out_exit_code` writable;
// `out_json` null or writable.
enum IkStatus ik_classify_mu(const char *source,
                             bool locally_lipschitz,
                             bool divergent_integral,
                             int32_t *out_exit_code,
                             char **out_json);

// Builds a control problem from a config document of kind "mcbf".
//
// # Safety
// `config_json` must be a NUL-terminated string and `out_problem` writable.
enum IkStatus ik_control_problem_from_json(const char *config_json,
                                           struct IkControlProblem **out_problem);

// State and input dimensions of a control problem.
//
// # Safety
// `problem` must be a live handle; the out-pointers null or writable.
enum IkStatus ik_control_problem_dims(const struct IkControlProblem *problem,
                                      size_t *out_state_dim,
                                      size_t *out_input_dim);

// Evaluates the safety filter at `x[0..n]`. On success `out_feasible`
// says whether the admissible input set is nonempty; if it is, the
// filtered input is written to `out_u[0..m]`.
//
// # Safety
// `problem` must be a live handle; `x` readable for `n` values, `out_u`
// writable for `m` values and `out_feasible` writable.
enum IkStatus ik_qp_filter(const struct IkControlProblem *problem,
                           const double *x,
                           size_t n,
                           double *out_u,
                           size_t m,
                           bool *out_feasible);

// Releases a control problem handle. Null is ignored.
//
// # Safety
// `problem` must come from [`ik_control_problem_from_json`] and not have
// been freed.
void ik_control_problem_free(struct IkControlProblem *problem);

// Runs every job of the config file at `config_path`, like the `run`
// command. `out_dir` may be null to use the config's default. Receives
// the run's exit code and, optionally, the report path.
//
// # Safety
// `config_path` must be a NUL-terminated string, `out_dir` null or one;
// `out_exit_code` writable; `out_report_path` null or writable.
enum IkStatus ik_run_config(const char *config_path,
                            const char *out_dir,
                            uint64_t seed,
                            int32_t *out_exit_code,
                            char **out_report_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INVARIANT_KIT_H */
