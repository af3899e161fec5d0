#ifndef PHI4_H
#define PHI4_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PHI4_STATUS_OK = 0,
  PHI4_STATUS_NULL_POINTER = 1,
  PHI4_STATUS_DOMAIN = 2,
  PHI4_STATUS_USAGE = 3,
  PHI4_STATUS_PADDING_REQUIRED = 4,
  PHI4_STATUS_SINGULAR = 5,
  PHI4_STATUS_IO = 6,
  PHI4_STATUS_OUT_OF_RANGE = 7,
  PHI4_STATUS_BUFFER_TOO_SMALL = 8,
  PHI4_STATUS_PANIC = 9,
} Phi4Status;

typedef enum {
  PHI4_START_MAX = 0,
  PHI4_START_MIN = 1,
  PHI4_START_H0 = 2,
} Phi4Start;

typedef enum {
  PHI4_PAD_FUNDAMENTAL = 0,
  PHI4_PAD_ENVELOPE = 1,
  PHI4_PAD_ZERO = 2,
} Phi4Pad;

typedef enum {
  PHI4_RUN_STATUS_CONVERGED = 0,
  PHI4_RUN_STATUS_RUNNING = 1,
  PHI4_RUN_STATUS_DIVERGED = 2,
  PHI4_RUN_STATUS_SINGULAR = 3,
} Phi4RunStatus;

/**
 * Opaque Green's function sequence.
 */
typedef struct Phi4Sequence Phi4Sequence;

/**
 * Opaque iteration trace.
 */
typedef struct Phi4Trace Phi4Trace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message, including the trailing NUL; 0 if none.
 */
size_t phi4_last_error_length(void);

/**
 * Copies the last error message (NUL-terminated) into `buf`.
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
Phi4Status phi4_last_error_message(char *buf, size_t len);

/**
 * `delta_{n,max}(lambda)` for odd `n >= 3`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
Phi4Status phi4_delta_max(size_t n, double lambda, double d0, double *out);

/**
 * `delta_{n,min}(lambda)` for odd `n >= 3`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
Phi4Status phi4_delta_min(size_t n, double lambda, double *out);

/**
 * Builds `H_max`, `H_min` or `H_0` on the odd grid `1..=n_work`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle owned by the caller.
 */
Phi4Status phi4_sequence_build(Phi4Start start,
                               double lambda,
                               size_t n_work,
                               double d0,
                               bool include_j2_zero,
                               Phi4Sequence **out);

/**
 * # Safety
 * `seq` must come from `phi4_sequence_build` and not be used afterwards. Null is ignored.
 */
void phi4_sequence_free(Phi4Sequence *seq);

/**
 * Number of stored entries (`(n_work + 1) / 2`), 0 for null.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t phi4_sequence_len(const Phi4Sequence *seq);

/**
 * Entry `H^{n+1}` as a sign (-1, 0, 1) and the natural log of its magnitude.
 *
 * # Safety
 * `seq` must be a live handle; `sign` and `ln_abs` valid pointers.
 */
Phi4Status phi4_sequence_get(const Phi4Sequence *seq, size_t n, int8_t *sign, double *ln_abs);

/**
 * Runs up to `nu_max` applications of `M*` from the given start.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle owned by the caller.
 */
Phi4Status phi4_iterate(Phi4Start start,
                        double lambda,
                        size_t n_max,
                        Phi4Pad pad,
                        size_t nu_max,
                        double tol_converge,
                        double div_threshold,
                        Phi4Trace **out);

/**
 * # Safety
 * `trace` must come from `phi4_iterate` and not be used afterwards. Null is ignored.
 */
void phi4_trace_free(Phi4Trace *trace);

/**
 * Number of snapshots (start included), 0 for null.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t phi4_trace_len(const Phi4Trace *trace);

/**
 * Final status; `nu` and `n` receive its location (`n` is 0 unless singular).
 *
 * # Safety
 * `trace` must be a live handle; the out pointers must be valid.
 */
Phi4Status phi4_trace_status(const Phi4Trace *trace, Phi4RunStatus *status, size_t *nu, size_t *n);

/**
 * `delta_n` of snapshot `nu`; `n = 1` gives `delta_1`.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
Phi4Status phi4_trace_delta(const Phi4Trace *trace, size_t nu, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHI4_H */
