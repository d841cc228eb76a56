#ifndef PHOTON_RECON_H
#define PHOTON_RECON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum PrStatus {
  PR_STATUS_OK = 0,
  PR_STATUS_NULL_POINTER = 1,
  PR_STATUS_DOMAIN = 2,
  PR_STATUS_VALIDATION = 3,
  PR_STATUS_DIMENSION_MISMATCH = 4,
  PR_STATUS_INFEASIBLE = 5,
  PR_STATUS_RANK_DEFICIENT = 6,
  PR_STATUS_NUMERICAL = 7,
  PR_STATUS_PARSE = 8,
  PR_STATUS_IO = 9,
  /**
   * A caller-provided buffer has the wrong length.
   */
  PR_STATUS_BUFFER_SIZE = 10,
  /**
   * A Rust panic was caught at the boundary.
   */
  PR_STATUS_PANIC = 11,
} PrStatus;

typedef enum PrOverflow {
  PR_OVERFLOW_INCLUDE = 0,
  PR_OVERFLOW_DISCARD = 1,
} PrOverflow;

typedef enum PrState {
  PR_STATE_COHERENT = 0,
  PR_STATE_SQUEEZED_VACUUM = 1,
} PrState;

/**
 * Opaque response matrix.
 */
typedef struct PrResponse PrResponse;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a NUL-terminated string.
 *
 * Returns the buffer size needed for the full message including the terminator.
 * Passing a null `buf` or zero `len` only queries that size.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pr_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pr_version(void);

/**
 * Quadrature density of Fock state `n` after loss with efficiency `eta`.
 *
 * # Safety
 * `out` must point to a writable `double`.
 */
enum PrStatus pr_fock_loss_density(int32_t n, double eta, double q, double *out);

/**
 * Builds the response matrix for photon numbers `0..=n_max` on a uniform grid.
 *
 * # Safety
 * `out` must point to writable storage for one handle pointer.
 */
enum PrStatus pr_response_new(double q_min,
                              double q_max,
                              size_t n_bins,
                              enum PrOverflow overflow,
                              int32_t n_max,
                              double eta,
                              struct PrResponse **out);

/**
 * Reads a response matrix written by the command-line tool.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must point to writable storage for one handle pointer.
 */
enum PrStatus pr_response_read(const char *path,
                               struct PrResponse **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must be null or come from a constructor of this library and not be used afterwards.
 */
void pr_response_free(struct PrResponse *handle);

/**
 * Number of model rows (bins, including overflow slots in include mode) and columns (`n_max + 1`).
 *
 * # Safety
 * `handle` must be a live handle; `rows` and `cols` must point to writable `size_t`s.
 */
enum PrStatus pr_response_dims(const struct PrResponse *handle, size_t *rows, size_t *cols);

/**
 * Copies the entries in row-major order into `buf`, which must hold exactly `rows * cols` values.
 *
 * # Safety
 * `handle` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum PrStatus pr_response_copy_entries(const struct PrResponse *handle, double *buf, size_t len);

/**
 * Simulates `n_events` homodyne events of a benchmark state and bins them on the handle's grid.
 *
 * `counts` receives one value per model row.
 *
 * # Safety
 * `handle` must be a live handle; `counts` must point to `len` writable doubles.
 */
enum PrStatus pr_simulate_counts(const struct PrResponse *handle,
                                 enum PrState state,
                                 double mean_photon,
                                 size_t n_events,
                                 uint64_t seed,
                                 double *counts,
                                 size_t len);

/**
 * Runs `iterations` EM steps from the uniform distribution.
 *
 * `counts` holds one value per model row; `rho` receives `n_max + 1` values.
 * `kkt_residual` may be null.
 *
 * # Safety
 * `handle` must be a live handle; `counts` must point to `n_counts` readable doubles;
 * `rho` to `rho_len` writable doubles; `kkt_residual` must be null or writable.
 */
enum PrStatus pr_em_reconstruct(const struct PrResponse *handle,
                                const double *counts,
                                size_t n_counts,
                                size_t iterations,
                                double *rho,
                                size_t rho_len,
                                double *kkt_residual);

/**
 * Unconstrained least-squares estimate and its standard errors; both buffers hold `n_max + 1` values.
 *
 * # Safety
 * As [`pr_em_reconstruct`]; `std_errors` may be null.
 */
enum PrStatus pr_linear_baseline(const struct PrResponse *handle,
                                 const double *counts,
                                 size_t n_counts,
                                 double *values,
                                 double *std_errors,
                                 size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHOTON_RECON_H */
