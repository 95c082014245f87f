#ifndef CPKERNEL_H
#define CPKERNEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum {
  CPK_STATUS_OK = 0,
  CPK_STATUS_NULL_POINTER = 1,
  CPK_STATUS_INVALID = 2,
  CPK_STATUS_DIMENSION_MISMATCH = 3,
  CPK_STATUS_NUMERICAL = 4,
  CPK_STATUS_NOT_PSD = 5,
  CPK_STATUS_UNKNOWN_LABEL = 6,
  CPK_STATUS_UNKNOWN_POINT = 7,
  CPK_STATUS_TOO_MANY_STRINGS = 8,
  CPK_STATUS_LIFT_INADMISSIBLE = 9,
  CPK_STATUS_CERTIFICATE_FAILED = 10,
  CPK_STATUS_NOT_CONVERGED = 11,
  CPK_STATUS_NOT_DOMINATED = 12,
  CPK_STATUS_NOT_SUBUNITAL = 13,
  CPK_STATUS_PRECONDITION_FAILED = 14,
  CPK_STATUS_BAD_DISTRIBUTION = 15,
  CPK_STATUS_UNDERFLOW = 16,
  CPK_STATUS_CHECK_FAILED = 17,
  CPK_STATUS_PANIC = 18,
} CpkStatus;

/**
 * Opaque operator-valued kernel.
 */
typedef struct CpkKernel CpkKernel;

/**
 * Opaque set of labelled CP maps.
 */
typedef struct CpkMaps CpkMaps;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *cpk_last_error_message(void);

/**
 * Builds a kernel on points `0..n` from its `(n·d)×(n·d)` Gram matrix.
 *
 * # Safety
 * `gram` must hold `2·(n·d)²` doubles; `out` must be writable.
 */
CpkStatus cpk_kernel_new(size_t n, size_t d, const double *gram, CpkKernel **out);

/**
 * # Safety
 * `k` must come from this library and not be used afterwards.
 */
void cpk_kernel_free(CpkKernel *k);

/**
 * # Safety
 * Pointers must be valid.
 */
CpkStatus cpk_kernel_dims(const CpkKernel *k, size_t *n, size_t *d);

/**
 * Checks hermiticity, positivity and the blockwise Cauchy–Schwarz bound.
 * `passed` is set to 1 when all hold; `min_eig` to the Gram's least eigenvalue.
 *
 * # Safety
 * Pointers must be valid.
 */
CpkStatus cpk_kernel_validate(const CpkKernel *k, double tol, int *passed, double *min_eig);

/**
 * Copies block `K(i, j)` into `out` (`2·d²` doubles).
 *
 * # Safety
 * Pointers must be valid and `out` large enough.
 */
CpkStatus cpk_kernel_block(const CpkKernel *k, size_t i, size_t j, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
CpkStatus cpk_maps_new(CpkMaps **out);

/**
 * Adds (or replaces) the map `label` with `count` Kraus operators of size
 * `d×d`, stored back to back in `kraus`.
 *
 * # Safety
 * `kraus` must hold `2·count·d²` doubles; `label` must be a C string.
 */
CpkStatus cpk_maps_add(CpkMaps *maps,
                       const char *label,
                       size_t d,
                       size_t count,
                       const double *kraus);

/**
 * # Safety
 * `maps` must come from this library and not be used afterwards.
 */
void cpk_maps_free(CpkMaps *maps);

/**
 * `K_w` for the word `labels[0] … labels[len-1]`; the last letter acts first.
 *
 * # Safety
 * `labels` must hold `len` C strings; `out` must be writable.
 */
CpkStatus cpk_iterate_kernel(const CpkKernel *k,
                             const CpkMaps *maps,
                             const char *const *labels,
                             size_t len,
                             CpkKernel **out);

/**
 * Contractivity certificate: `contractive` is 1 when every lift is
 * admissible with `d_norm ≤ 1 + tol`; `max_d_norm` is the largest `d_norm`.
 *
 * # Safety
 * Pointers must be valid.
 */
CpkStatus cpk_certify(const CpkKernel *k,
                      const CpkMaps *maps,
                      double tol,
                      int *contractive,
                      double *max_d_norm);

/**
 * Top Lyapunov exponent of the uniform i.i.d. model over all labels,
 * estimated from `trials` paths of length `n`.
 *
 * # Safety
 * Pointers must be valid.
 */
CpkStatus cpk_lyapunov(const CpkKernel *k,
                       const CpkMaps *maps,
                       size_t n,
                       size_t trials,
                       uint64_t seed,
                       double *lambda_hat,
                       double *std_err);

/**
 * Runs a scenario document and returns the JSON report in `report`
 * (release with [`cpk_string_free`]) and the run's exit code. The status
 * is `Ok` whenever a report was produced, even for a failing run.
 *
 * # Safety
 * `json` must be a C string; outputs must be writable.
 */
CpkStatus cpk_run_scenario_json(const char *json, char **report, int *exit_code);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void cpk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPKERNEL_H */
