#ifndef STLC_H
#define STLC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StlcStatus {
  STLC_STATUS_OK = 0,
  // A required pointer argument was null.
  STLC_STATUS_ERR_NULL = 1,
  STLC_STATUS_ERR_INVALID_ARGUMENT = 2,
  STLC_STATUS_ERR_CONFIG = 3,
  // Integration failure, inconsistent evaluations or an ill-conditioned system.
  STLC_STATUS_ERR_NUMERICAL = 4,
  STLC_STATUS_ERR_SYNTHESIS = 5,
  STLC_STATUS_ERR_EXPERIMENT = 6,
  STLC_STATUS_ERR_IO = 7,
  // The output buffer is too small; the required size was written.
  STLC_STATUS_ERR_BUFFER_TOO_SMALL = 8,
  STLC_STATUS_ERR_PANIC = 9,
} StlcStatus;

// Scalar control u on [0, T].
typedef struct StlcControl StlcControl;

// Dipole moment μ.
typedef struct StlcDipole StlcDipole;

// Galerkin operator for a dipole and mode count.
typedef struct StlcOperator StlcOperator;

// Lost-direction coefficients of a dipole.
typedef struct StlcCoefficients {
  // ⟨μφ_1, φ_K⟩.
  double linear_k;
  double a1;
  double a2;
  double a3;
  double c_k;
  // −4⟨μ'²μ''φ_1, φ_K⟩.
  double c_k_bracket;
  // min over j ≠ K of j⁷|⟨μφ_1, φ_j⟩|.
  double decay_constant;
  // 1 when every hypothesis verdict holds.
  int32_t verdict;
} StlcCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// NUL-terminated library version; static storage.
const char *stlc_version(void);

// Copies the last error message of this thread into `buf`; `needed` receives the size
// including the NUL.
//
// # Safety
// `buf` must point to `len` writable bytes or be null; `needed` must be null or valid.
enum StlcStatus stlc_last_error_message(char *buf, size_t len, size_t *needed);

// Parses a dipole from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
enum StlcStatus stlc_dipole_from_json(const char *json, struct StlcDipole **out);

// Synthesizes a dipole with lost mode `k` on `modes` Galerkin modes.
//
// # Safety
// `out` must be valid for writes.
enum StlcStatus stlc_dipole_synthesize(size_t k,
                                       size_t modes,
                                       uint64_t seed,
                                       struct StlcDipole **out);

// Writes the JSON form of `dipole` into `buf`; `needed` receives the size including the NUL.
//
// # Safety
// `dipole` must be a live handle; `buf` must point to `len` writable bytes or be null.
enum StlcStatus stlc_dipole_to_json(const struct StlcDipole *dipole,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

// Value μ(x).
//
// # Safety
// `dipole` must be a live handle; `out` must be valid for writes.
enum StlcStatus stlc_dipole_value(const struct StlcDipole *dipole, double x, double *out);

// Hypothesis coefficients for lost mode `k` on `modes` modes.
//
// # Safety
// `dipole` must be a live handle; `out` must be valid for writes.
enum StlcStatus stlc_dipole_coefficients(const struct StlcDipole *dipole,
                                         size_t k,
                                         size_t modes,
                                         struct StlcCoefficients *out);

// Releases a dipole; null is ignored.
//
// # Safety
// `dipole` must be null or a handle not yet freed.
void stlc_dipole_free(struct StlcDipole *dipole);

// Galerkin operator on the first `modes` eigenmodes.
//
// # Safety
// `dipole` must be a live handle; `out` must be valid for writes.
enum StlcStatus stlc_operator_new(const struct StlcDipole *dipole,
                                  size_t modes,
                                  struct StlcOperator **out);

// Mode count of `op` (0 for null).
//
// # Safety
// `op` must be null or a live handle.
size_t stlc_operator_modes(const struct StlcOperator *op);

// # Safety
// `op` must be null or a handle not yet freed.
void stlc_operator_free(struct StlcOperator *op);

// Cubic oscillating control `u_b` of the PDE family on [0, horizon].
//
// # Safety
// `out` must be valid for writes.
enum StlcStatus stlc_control_oscillating(double b,
                                         double c_k,
                                         double horizon,
                                         double support,
                                         struct StlcControl **out);

// Parses a control from its JSON form (as written by the `target` command).
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
enum StlcStatus stlc_control_from_json(const char *json, struct StlcControl **out);

// `u(t)`, or its `n`-th primitive for `n > 0`.
//
// # Safety
// `control` must be a live handle; `out` must be valid for writes.
enum StlcStatus stlc_control_eval(const struct StlcControl *control,
                                  double t,
                                  size_t n,
                                  double *out);

// Horizon T of `control` (NaN for null).
//
// # Safety
// `control` must be null or a live handle.
double stlc_control_horizon(const struct StlcControl *control);

// # Safety
// `control` must be null or a handle not yet freed.
void stlc_control_free(struct StlcControl *control);

// Integrates from the ground state to the control horizon and writes the final spectral
// coefficients into `re`, `im` (each of length `len` = mode count).
//
// # Safety
// Handles must be live; `re`, `im` must point to `len` writable doubles; `norm_drift` may be null.
enum StlcStatus stlc_simulate_ground(const struct StlcOperator *op,
                                     const struct StlcControl *control,
                                     double tol,
                                     double *re,
                                     double *im,
                                     size_t len,
                                     double *norm_drift);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STLC_H */
