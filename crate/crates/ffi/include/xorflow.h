#ifndef XORFLOW_H
#define XORFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum XfStatus {
  XF_STATUS_OK = 0,
  XF_STATUS_NULL_POINTER = 1,
  XF_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or an instance that fails validation.
   */
  XF_STATUS_INVALID_INPUT = 3,
  /**
   * Rejected configuration, e.g. epsilon out of range.
   */
  XF_STATUS_INVALID_CONFIG = 4,
  /**
   * Index out of range, or a solution naming unknown nodes or links.
   */
  XF_STATUS_UNKNOWN_INDEX = 5,
  XF_STATUS_INTERNAL = 6,
  XF_STATUS_PANIC = 7,
} XfStatus;

/**
 * Parsed problem instance.
 */
typedef struct XfInstance XfInstance;

/**
 * Result of a completed run.
 */
typedef struct XfRun XfRun;

typedef struct XfRunConfig {
  double epsilon;
  double kappa;
  /**
   * 0 selects the default `N - 1`.
   */
  uint32_t big_l;
  /**
   * 0 selects the default `4 (N - 1)`.
   */
  uint32_t big_f;
  uint64_t max_rounds;
  /**
   * Values `<= 0` select epsilon.
   */
  double stop_fraction;
  bool fast_index;
  bool routing_only;
} XfRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *xf_last_error(void);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum XfStatus xf_instance_parse(const char *json, struct XfInstance **out);

/**
 * # Safety
 * `inst` must come from [`xf_instance_parse`] and not be freed twice.
 */
void xf_instance_free(struct XfInstance *inst);

struct XfRunConfig xf_run_config_default(void);

/**
 * Runs to convergence or `max_rounds`. A run that does not converge still
 * succeeds; query [`xf_run_converged`].
 *
 * # Safety
 * `inst` must be a live instance handle, `config` may be null for
 * defaults, `out` must be writable.
 */
enum XfStatus xf_run(const struct XfInstance *inst,
                     const struct XfRunConfig *config,
                     struct XfRun **out);

/**
 * # Safety
 * `run` must come from [`xf_run`] and not be freed twice.
 */
void xf_run_free(struct XfRun *run);

/**
 * # Safety
 * `run` must be a live run handle or null (reported as not converged).
 */
bool xf_run_converged(const struct XfRun *run);

/**
 * # Safety
 * `run` must be a live run handle or null (reported as 0).
 */
uint64_t xf_run_rounds(const struct XfRun *run);

/**
 * # Safety
 * `run` must be a live run handle; `out` must be writable.
 */
enum XfStatus xf_run_achieved_rate(const struct XfRun *run, size_t session, double *out);

/**
 * Solution variables as JSON. Release the string with [`xf_string_free`].
 *
 * # Safety
 * `run` must be a live run handle; `out` must be writable.
 */
enum XfStatus xf_run_solution_json(const struct XfRun *run, char **out);

/**
 * Verifies a solution JSON against the instance using the rates recorded
 * in the solution. `tolerance <= 0` selects `0.1 * min rate`.
 *
 * # Safety
 * `inst` must be a live instance handle, `solution_json` a NUL-terminated
 * string, and `pass` / `max_residual` writable (either may be null).
 */
enum XfStatus xf_verify(const struct XfInstance *inst,
                        const char *solution_json,
                        double tolerance,
                        bool *pass,
                        double *max_residual);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void xf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XORFLOW_H */
