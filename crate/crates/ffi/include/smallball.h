#ifndef SMALLBALL_H
#define SMALLBALL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Status code of every fallible call.
 */
typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_UTF8 = 2,
  SB_STATUS_INVALID_GRID = 3,
  SB_STATUS_INVALID_DENSITY = 4,
  SB_STATUS_SHAPE_MISMATCH = 5,
  SB_STATUS_NOT_ORIGIN_CENTERED = 6,
  SB_STATUS_VOLUME_TOO_LARGE = 7,
  SB_STATUS_GUARD_EXCEEDED = 8,
  SB_STATUS_HYPOTHESIS_VIOLATED = 9,
  SB_STATUS_INFEASIBLE = 10,
  SB_STATUS_PRECONDITION = 11,
  SB_STATUS_GRID_TOO_COARSE = 12,
  SB_STATUS_PARSE = 13,
  SB_STATUS_IO = 14,
  SB_STATUS_PANIC = 15,
} SbStatus;

/*
 Shape family of [`sb_density_generate`].
 */
typedef enum SbShape {
  SB_SHAPE_MULTI_BUMP = 0,
  SB_SHAPE_RANDOM_CELLS = 1,
  SB_SHAPE_INDICATOR_UNION = 2,
} SbShape;

/*
 Piecewise-constant density on a rectangular grid.
 */
typedef struct SbDensity SbDensity;

/*
 Set of grid cells.
 */
typedef struct SbMask SbMask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *sb_last_error_message(void);

/*
 Creates a density on the grid `[lo[a], hi[a]]` with `counts[a]` cells per
 axis from `len` row-major cell values (last axis fastest).

 # Safety
 `lo`, `hi` and `counts` must point to `dim` readable elements, `values` to
 `len`, and `out` must be writable.
 */
enum SbStatus sb_density_new(size_t dim,
                             const double *lo,
                             const double *hi,
                             const size_t *counts,
                             const double *values,
                             size_t len,
                             struct SbDensity **out);

/*
 Random density bounded by `k` with unit mass on the cube `[lo, hi]^dim`.

 # Safety
 `out` must be writable.
 */
enum SbStatus sb_density_generate(size_t dim,
                                  double k,
                                  double lo,
                                  double hi,
                                  size_t cells,
                                  uint64_t seed,
                                  enum SbShape shape,
                                  struct SbDensity **out);

/*
 Reads an SBD density file.

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum SbStatus sb_density_read(const char *path, struct SbDensity **out);

/*
 Writes `f` as an SBD file, atomically.

 # Safety
 `f` must be a live handle and `path` a NUL-terminated string.
 */
enum SbStatus sb_density_write(const struct SbDensity *f, const char *path);

/*
 Releases a density. NULL is ignored.

 # Safety
 `f` must be NULL or a handle not yet freed.
 */
void sb_density_free(struct SbDensity *f);

/*
 Number of axes, or 0 for NULL.

 # Safety
 `f` must be NULL or a live handle.
 */
size_t sb_density_dim(const struct SbDensity *f);

/*
 Number of cells, or 0 for NULL.

 # Safety
 `f` must be NULL or a live handle.
 */
size_t sb_density_len(const struct SbDensity *f);

/*
 Copies the cell values into `out`, which must hold exactly
 `sb_density_len(f)` elements.

 # Safety
 `f` must be a live handle and `out` must point to `len` writable doubles.
 */
enum SbStatus sb_density_values(const struct SbDensity *f, double *out, size_t len);

/*
 `∫ f`.

 # Safety
 `f` must be a live handle and `out` writable.
 */
enum SbStatus sb_density_integral(const struct SbDensity *f, double *out);

/*
 Largest cell value.

 # Safety
 `f` must be a live handle and `out` writable.
 */
enum SbStatus sb_density_ess_sup(const struct SbDensity *f, double *out);

/*
 Symmetric decreasing rearrangement; the grid must be centred at the
 origin.

 # Safety
 `f` must be a live handle and `out` writable.
 */
enum SbStatus sb_density_rearrange(const struct SbDensity *f, struct SbDensity **out);

/*
 Density of the sum of `n` independent variables. With `cell_exact`
 nonzero the result holds exact cell averages of the continuous sum,
 otherwise the lattice sum on the common cell width.

 # Safety
 `fs` must point to `n` live handles and `out` must be writable.
 */
enum SbStatus sb_sum_density(const struct SbDensity *const *fs,
                             size_t n,
                             int32_t cell_exact,
                             struct SbDensity **out);

/*
 Creates a mask from `len` row-major flags (nonzero means included).

 # Safety
 `lo`, `hi` and `counts` must point to `dim` readable elements, `included`
 to `len`, and `out` must be writable.
 */
enum SbStatus sb_mask_new(size_t dim,
                          const double *lo,
                          const double *hi,
                          const size_t *counts,
                          const uint8_t *included,
                          size_t len,
                          struct SbMask **out);

/*
 Releases a mask. NULL is ignored.

 # Safety
 `m` must be NULL or a handle not yet freed.
 */
void sb_mask_free(struct SbMask *m);

/*
 `P(X_1 + ... + X_n ∈ S)` from the lattice sum, with `S` moved onto the
 sum grid by cell-centre membership.

 # Safety
 `fs` must point to `n` live handles, `s` must be live and `out` writable.
 */
enum SbStatus sb_small_ball_prob(const struct SbDensity *const *fs,
                                 size_t n,
                                 const struct SbMask *s,
                                 double *out);

/*
 Extremal small-ball bound for a set of volume `set_volume` and its
 discretization budget.

 # Safety
 `ks` must point to `n` readable values; `value` and `budget` writable.
 */
enum SbStatus sb_bound_prob(size_t dim,
                            const double *ks,
                            size_t n,
                            double set_volume,
                            size_t resolution,
                            double *value,
                            double *budget);

/*
 Maximum density of the extremal sum and its discretization budget.

 # Safety
 `ks` must point to `n` readable values; `value` and `budget` writable.
 */
enum SbStatus sb_bound_density(size_t dim,
                               const double *ks,
                               size_t n,
                               size_t resolution,
                               double *value,
                               double *budget);

/*
 Radius of the `dim`-dimensional ball of volume `volume`.

 # Safety
 `out` must be writable.
 */
enum SbStatus sb_ball_radius_for_volume(size_t dim, double volume, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMALLBALL_H */
