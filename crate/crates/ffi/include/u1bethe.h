#ifndef U1BETHE_H
#define U1BETHE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum BetheStatus {
  /**
   * Success.
   */
  BETHE_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BETHE_STATUS_NULL_POINTER = 1,
  /**
   * An argument or option has an unusable value, or a buffer is too small.
   */
  BETHE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A weight was evaluated at a pole or outside its domain.
   */
  BETHE_STATUS_PARAMETER_DOMAIN = 3,
  /**
   * A denominator or pivot vanished.
   */
  BETHE_STATUS_SINGULARITY = 4,
  /**
   * An index lies outside its admissible range.
   */
  BETHE_STATUS_INDEX_OUT_OF_RANGE = 5,
  /**
   * The requested particle sector is empty.
   */
  BETHE_STATUS_EMPTY_SECTOR = 6,
  /**
   * Newton iteration did not converge or its Jacobian was singular.
   */
  BETHE_STATUS_NO_CONVERGENCE = 7,
  /**
   * The Hilbert space exceeds the dense limit.
   */
  BETHE_STATUS_DIMENSION_TOO_LARGE = 8,
  /**
   * A table model lacks the requested grid point.
   */
  BETHE_STATUS_UNKNOWN_GRID_POINT = 9,
  /**
   * Any other engine error.
   */
  BETHE_STATUS_INTERNAL = 10,
  /**
   * A panic was caught at the boundary.
   */
  BETHE_STATUS_PANIC = 11,
} BetheStatus;

/**
 * Opaque finite chain with its model.
 */
typedef struct BetheChain BetheChain;

/**
 * Opaque weight model.
 */
typedef struct BetheModel BetheModel;

/**
 * Complex number as two doubles.
 */
typedef struct BetheComplex {
  /**
   * Real part.
   */
  double re;
  /**
   * Imaginary part.
   */
  double im;
} BetheComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bethe_version(void);

/**
 * Message of the last failed call on this thread, empty after a success.
 *
 * The pointer stays valid until the next call into the library on the same thread.
 */
const char *bethe_last_error_message(void);

/**
 * Creates the six-vertex model with anisotropy `eta`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum BetheStatus bethe_model_six_vertex(struct BetheComplex eta, struct BetheModel **out);

/**
 * Creates the spin-(n−1)/2 trigonometric model on `n` states with anisotropy `eta`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum BetheStatus bethe_model_higher_spin_xxz(size_t n,
                                             struct BetheComplex eta,
                                             struct BetheModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from a model constructor that was not freed before.
 */
void bethe_model_free(struct BetheModel *model);

/**
 * Number of states per site, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t bethe_model_states(const struct BetheModel *model);

/**
 * Writes the N⁴ normalized weights R(λ,μ)_{a,b}^{c,d} to `out`, entry
 * `(a,b,c,d)` at offset `((a−1)N + b−1)·N² + (c−1)N + d−1`.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `out_len` elements.
 */
enum BetheStatus bethe_eval_r(const struct BetheModel *model,
                              struct BetheComplex lambda,
                              struct BetheComplex mu,
                              struct BetheComplex *out,
                              size_t out_len);

/**
 * Relative max-abs Yang–Baxter residual at `(l1, l2, l3)`.
 *
 * # Safety
 * `model` must be a live handle and `residual` a valid pointer.
 */
enum BetheStatus bethe_check_yang_baxter(const struct BetheModel *model,
                                         struct BetheComplex l1,
                                         struct BetheComplex l2,
                                         struct BetheComplex l3,
                                         double *residual);

/**
 * Max-abs unitarity residual at `(lambda, mu)`.
 *
 * # Safety
 * `model` must be a live handle and `residual` a valid pointer.
 */
enum BetheStatus bethe_check_unitarity(const struct BetheModel *model,
                                       struct BetheComplex lambda,
                                       struct BetheComplex mu,
                                       double *residual);

/**
 * Creates a chain of `length` sites; `inhomogeneities` may be null for the
 * homogeneous chain, otherwise it must hold `length` values. The model is copied.
 *
 * # Safety
 * `model` must be a live handle, `inhomogeneities` null or valid for `length`
 * elements and `out` valid for one handle.
 */
enum BetheStatus bethe_chain_new(const struct BetheModel *model,
                                 size_t length,
                                 const struct BetheComplex *inhomogeneities,
                                 struct BetheChain **out);

/**
 * Releases a chain; null is ignored.
 *
 * # Safety
 * `chain` must be null or a handle from [`bethe_chain_new`] that was not freed before.
 */
void bethe_chain_free(struct BetheChain *chain);

/**
 * Hilbert-space dimension N^L, or 0 for a null handle.
 *
 * # Safety
 * `chain` must be null or a live chain handle.
 */
size_t bethe_chain_dim(const struct BetheChain *chain);

/**
 * Transfer-matrix eigenvalue Λ_n(λ) of the Bethe state with `n` roots.
 *
 * # Safety
 * `chain` must be a live handle, `roots` valid for `n` elements and `out` valid.
 */
enum BetheStatus bethe_eigenvalue(const struct BetheChain *chain,
                                  struct BetheComplex lambda,
                                  const struct BetheComplex *roots,
                                  size_t n,
                                  struct BetheComplex *out);

/**
 * Max-abs residual of the Bethe equations at `roots`.
 *
 * # Safety
 * `chain` must be a live handle, `roots` valid for `n` elements and `out` valid.
 */
enum BetheStatus bethe_bae_residual(const struct BetheChain *chain,
                                    const struct BetheComplex *roots,
                                    size_t n,
                                    double *out);

/**
 * Writes the Bethe vector |Φ_n⟩ in the site-1-slowest product basis.
 *
 * # Safety
 * `chain` must be a live handle, `roots` valid for `n` elements and `out`
 * valid for `out_len` elements.
 */
enum BetheStatus bethe_build_vector(const struct BetheChain *chain,
                                    const struct BetheComplex *roots,
                                    size_t n,
                                    struct BetheComplex *out,
                                    size_t out_len);

/**
 * Relative eigenstate residual ‖T(λ)Φ − ΛΦ‖ / ‖Φ‖ in the max-abs norm.
 *
 * # Safety
 * `chain` must be a live handle, `roots` valid for `n` elements and `out` valid.
 */
enum BetheStatus bethe_eigenstate_residual(const struct BetheChain *chain,
                                           struct BetheComplex lambda,
                                           const struct BetheComplex *roots,
                                           size_t n,
                                           double *out);

/**
 * Solves the Bethe equations for `n` roots and keeps the physical root sets.
 *
 * The number of sets found is written to `found`. Up to `capacity` sets are
 * written to `out_roots` as consecutive groups of `n` values; a smaller
 * capacity truncates the output without error. `tol` ≤ 0 selects the default
 * tolerance 1e−12.
 *
 * # Safety
 * `chain` must be a live handle, `out_roots` valid for `capacity · n`
 * elements (or null when `capacity` is 0) and `found` valid.
 */
enum BetheStatus bethe_solve_bae(const struct BetheChain *chain,
                                 size_t n,
                                 double tol,
                                 uint64_t seed,
                                 struct BetheComplex *out_roots,
                                 size_t capacity,
                                 size_t *found);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* U1BETHE_H */
