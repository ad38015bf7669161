#ifndef VPRK_H
#define VPRK_H

/* Generated with cbindgen:0.26.0 */

/* This file is generated by cbindgen from vprk-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef struct VprkField VprkField;
typedef struct VprkQuadField VprkQuadField;
typedef struct VprkTableau VprkTableau;

// Status code of every fallible call.
typedef enum VprkStatus {
  VPRK_STATUS_OK = 0,
  VPRK_STATUS_NULL_ARGUMENT = 1,
  VPRK_STATUS_INVALID_UTF8 = 2,
  VPRK_STATUS_INVALID_JSON = 3,
  VPRK_STATUS_UNKNOWN_NAME = 4,
  VPRK_STATUS_BAD_PARAMS = 5,
  VPRK_STATUS_NUMERICAL_ERROR = 6,
  VPRK_STATUS_IO_ERROR = 7,
  VPRK_STATUS_INTERNAL_PANIC = 8,
} VprkStatus;

// Experiment verdict, mirroring the report field.
typedef enum VprkVerdict {
  VPRK_VERDICT_PRESERVED = 0,
  VPRK_VERDICT_VIOLATED = 1,
  VPRK_VERDICT_INCONCLUSIVE = 2,
} VprkVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent error on this thread, valid until the next
// failing call on the same thread.
const char *vprk_last_error_message(void);

// Release a string returned through an out-parameter.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void vprk_string_free(char *s);

// Library version as a static string.
const char *vprk_version(void);

// Build a catalog field from a JSON descriptor such as
// `{"name":"example2","params":{"c":1.0}}`.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be writable.
enum VprkStatus vprk_field_from_json(const char *json, VprkField **out);

// Phase-space dimension of a field; 0 for a null handle.
uintptr_t vprk_field_dim(const VprkField *field);

// Evaluate f(x) into `out` (both of length `len == dim`).
//
// # Safety
// `x` and `out` must point to `len` readable/writable doubles.
enum VprkStatus vprk_field_eval(const VprkField *field,
                                const double *x,
                                uintptr_t len,
                                double *out);

// # Safety
// `field` must come from this library and must not be used afterwards.
void vprk_field_free(VprkField *field);

// Build a quadratic field handle from a JSON descriptor; only
// `quad_hamiltonian`, `linear` and `quadratic` descriptors qualify.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be writable.
enum VprkStatus vprk_quad_field_from_json(const char *json, VprkQuadField **out);

// # Safety
// `field` must come from this library and must not be used afterwards.
void vprk_quad_field_free(VprkQuadField *field);

// Look up a builtin tableau: midpoint, trapezoidal, gauss2 or gauss3.
//
// # Safety
// `name` must be a valid NUL-terminated string; `out` must be writable.
enum VprkStatus vprk_tableau_builtin(const char *name, VprkTableau **out);

// Parse a tableau from its JSON form `{"s":..,"A":[[..]],"b":[..]}`.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be writable.
enum VprkStatus vprk_tableau_from_json(const char *json, VprkTableau **out);

// Stage count; 0 for a null handle.
uintptr_t vprk_tableau_stages(const VprkTableau *tableau);

// # Safety
// `tableau` must come from this library and must not be used afterwards.
void vprk_tableau_free(VprkTableau *tableau);

// One implicit Runge-Kutta step. Writes the next state into `x_next` and,
// when `det_out` is non-null, the step-map Jacobian determinant.
//
// # Safety
// `x` and `x_next` must point to `len` readable/writable doubles.
enum VprkStatus vprk_rk_step(const VprkField *field,
                             const VprkTableau *tableau,
                             double h,
                             const double *x,
                             uintptr_t len,
                             double *x_next,
                             double *det_out);

// One Kahan step on a quadratic field, with the optional exact
// determinant of the step map.
//
// # Safety
// `x` and `x_next` must point to `len` readable/writable doubles.
enum VprkStatus vprk_kahan_step(const VprkQuadField *field,
                                double h,
                                const double *x,
                                uintptr_t len,
                                double *x_next,
                                double *det_out);

// Classify a field on `samples` seeded points and return the report as a
// JSON string in `out_json` (release with [`vprk_string_free`]).
//
// # Safety
// `out_json` must be writable.
enum VprkStatus vprk_classify(const VprkField *field,
                              uintptr_t samples,
                              uint64_t seed,
                              char **out_json);

// Run a registry experiment. `overrides_json` and `csv_path` may be null;
// when `out_report_json` is non-null it receives the full report (release
// with [`vprk_string_free`]). `out_verdict` and `out_matches_expectation`
// are optional out-parameters.
//
// # Safety
// Non-null pointers must be valid for their advertised use.
enum VprkStatus vprk_run_experiment(const char *name,
                                    const char *overrides_json,
                                    const char *csv_path,
                                    enum VprkVerdict *out_verdict,
                                    bool *out_matches_expectation,
                                    char **out_report_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* VPRK_H */
