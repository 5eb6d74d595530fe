#ifndef FLOQUET_H
#define FLOQUET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FloquetStatus {
  FLOQUET_STATUS_OK = 0,
  // A required pointer argument was null.
  FLOQUET_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  FLOQUET_STATUS_INVALID_UTF8 = 2,
  // The configuration was rejected.
  FLOQUET_STATUS_CONFIG = 3,
  // The analysis failed numerically.
  FLOQUET_STATUS_NUMERIC = 4,
  // An output buffer was too small.
  FLOQUET_STATUS_BUFFER_TOO_SMALL = 5,
  // A time argument does not belong to the time scale.
  FLOQUET_STATUS_OUT_OF_DOMAIN = 6,
  // Internal error; no further calls on the handle are meaningful.
  FLOQUET_STATUS_PANIC = 7,
} FloquetStatus;

typedef enum FloquetVerdict {
  FLOQUET_VERDICT_EXPONENTIALLY_STABLE = 0,
  FLOQUET_VERDICT_STABLE = 1,
  FLOQUET_VERDICT_UNSTABLE_POLYNOMIAL = 2,
  FLOQUET_VERDICT_UNSTABLE_EXPONENTIAL = 3,
} FloquetVerdict;

// Opaque handle to a loaded system and its (lazily computed) monodromy.
typedef struct FloquetSystem FloquetSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a JSON system description and stores a new handle in `*out`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
// The handle must be released with [`floquet_system_free`].
enum FloquetStatus floquet_system_from_json(const char *json, struct FloquetSystem **out);

// Releases a handle.  Null is ignored.
//
// # Safety
// `handle` must come from [`floquet_system_from_json`] and not be used afterwards.
void floquet_system_free(struct FloquetSystem *handle);

// Dimension `n` of the system, 0 for a null handle.
//
// # Safety
// `handle` must be null or a live handle.
size_t floquet_system_dimension(const struct FloquetSystem *handle);

// Period of the time scale, NaN for a null handle.
//
// # Safety
// `handle` must be null or a live handle.
double floquet_system_period(const struct FloquetSystem *handle);

// Monodromy matrix `Φ(t0 + p, t0)`, row-major into `re`/`im` (at least `n*n` each).
//
// # Safety
// `re` and `im` must point to `len` writable doubles.
enum FloquetStatus floquet_monodromy(const struct FloquetSystem *handle,
                                     double *re,
                                     double *im,
                                     size_t len);

// Transition matrix `Φ(t, t0)` for any `t`, `t0` of the time scale.
//
// # Safety
// `re` and `im` must point to `len` writable doubles.
enum FloquetStatus floquet_transition(const struct FloquetSystem *handle,
                                      double t,
                                      double t0,
                                      double *re,
                                      double *im,
                                      size_t len);

// Floquet multipliers with algebraic multiplicity (`n` values); `*count`
// receives `n`.
//
// # Safety
// `re` and `im` must point to `len` writable doubles, `count` must be writable.
enum FloquetStatus floquet_multipliers(const struct FloquetSystem *handle,
                                       double *re,
                                       double *im,
                                       size_t len,
                                       size_t *count);

// Stability class from the multipliers, with the configured unit-circle tolerance.
//
// # Safety
// `out` must be writable.
enum FloquetStatus floquet_verdict(const struct FloquetSystem *handle, enum FloquetVerdict *out);

// The `analyze` report as a JSON string in `*out`, to be released with
// [`floquet_string_free`].
//
// # Safety
// `out` must be writable.
enum FloquetStatus floquet_analyze_json(const struct FloquetSystem *handle, char **out);

// Releases a string returned by this library.  Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void floquet_string_free(char *s);

// Message of the last failed call on this thread (empty after a success).
// Valid until the next call into the library from the same thread.
const char *floquet_last_error(void);

// Short name of a status code; static storage.
const char *floquet_status_name(enum FloquetStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOQUET_H */
