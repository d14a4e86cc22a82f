#ifndef FEKIT_H
#define FEKIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C API.
 */
typedef enum FekitStatus {
  FEKIT_STATUS_OK = 0,
  FEKIT_STATUS_NULL_POINTER = 1,
  FEKIT_STATUS_INVALID_ARGUMENT = 2,
  FEKIT_STATUS_UNSUPPORTED = 3,
  FEKIT_STATUS_SINGULAR_MATRIX = 4,
  FEKIT_STATUS_DEGENERATE_GEOMETRY = 5,
  FEKIT_STATUS_NONCONFORMING = 6,
  FEKIT_STATUS_PARSE = 7,
  FEKIT_STATUS_SOLVER = 8,
  FEKIT_STATUS_STATE = 9,
  FEKIT_STATUS_IO = 10,
  FEKIT_STATUS_PANIC = 11,
} FekitStatus;

/**
 * Poisson discretization selector.
 */
typedef enum FekitPoissonMethod {
  FEKIT_POISSON_METHOD_CONTINUOUS = 0,
  FEKIT_POISSON_METHOD_INTERIOR_PENALTY = 1,
} FekitPoissonMethod;

/**
 * Manufactured solution selector.
 */
typedef enum FekitCase {
  FEKIT_CASE_SINE = 0,
  FEKIT_CASE_POLYNOMIAL = 1,
} FekitCase;

/**
 * Opaque cell topology.
 */
typedef struct FekitPolytope FekitPolytope;

/**
 * Opaque mesh.
 */
typedef struct FekitTriangulation FekitTriangulation;

/**
 * Summary of a solved problem.
 */
typedef struct FekitReport {
  size_t free_dofs;
  size_t fixed_dofs;
  double l2_error;
  double h1_error;
  /**
   * Mean-free pressure L2 error; zero for Poisson.
   */
  double pressure_l2_error;
  double relative_residual;
} FekitReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buffer` (NUL
 * terminated, truncated to `capacity`) and returns the full message length,
 * or 0 when the last call succeeded.
 *
 * # Safety
 * `buffer` must be null or point to `capacity` writable bytes.
 */
size_t fekit_last_error_message(char *buffer, size_t capacity);

/**
 * Creates the polytope of dimension `num_dims` whose bit `i` of `topology`
 * selects a prism (1) or pyramid (0) extrusion in direction `i`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum FekitStatus fekit_polytope_new(size_t num_dims, uint32_t topology, struct FekitPolytope **out);

/**
 * Number of n-faces of dimension `dim`, or of all dimensions when `dim`
 * exceeds the polytope dimension. Returns 0 for a null handle.
 *
 * # Safety
 * `polytope` must be null or a live handle.
 */
size_t fekit_polytope_num_n_faces(const struct FekitPolytope *polytope, size_t dim);

/**
 * # Safety
 * `polytope` must be null or a handle not yet freed.
 */
void fekit_polytope_free(struct FekitPolytope *polytope);

/**
 * Structured mesh of the unit box with `cells[i]` cells in direction `i`.
 *
 * # Safety
 * `cells` must point to `num_dims` readable values and `out` to writable storage.
 */
enum FekitStatus fekit_triangulation_structured(size_t num_dims,
                                                const size_t *cells,
                                                struct FekitTriangulation **out);

/**
 * Reads a mesh file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid writable storage.
 */
enum FekitStatus fekit_triangulation_import(const char *path, struct FekitTriangulation **out);

/**
 * Writes a mesh file.
 *
 * # Safety
 * `tri` must be a live handle and `path` a NUL-terminated string.
 */
enum FekitStatus fekit_triangulation_export(const struct FekitTriangulation *tri, const char *path);

/**
 * Cell count, or 0 for a null handle.
 *
 * # Safety
 * `tri` must be null or a live handle.
 */
size_t fekit_triangulation_num_cells(const struct FekitTriangulation *tri);

/**
 * Vertex count, or 0 for a null handle.
 *
 * # Safety
 * `tri` must be null or a live handle.
 */
size_t fekit_triangulation_num_vertices(const struct FekitTriangulation *tri);

/**
 * Count of vertices, edges and faces below the cell dimension, or 0 for a
 * null handle.
 *
 * # Safety
 * `tri` must be null or a live handle.
 */
size_t fekit_triangulation_num_vefs(const struct FekitTriangulation *tri);

/**
 * # Safety
 * `tri` must be null or a handle not yet freed.
 */
void fekit_triangulation_free(struct FekitTriangulation *tri);

/**
 * Solves a manufactured Poisson problem of order `order` on `tri`. A
 * non-positive `penalty` selects the default `10 (k+1)²`.
 *
 * # Safety
 * `tri` must be a live handle and `out` valid writable storage.
 */
enum FekitStatus fekit_poisson_solve(const struct FekitTriangulation *tri,
                                     enum FekitPoissonMethod method,
                                     size_t order,
                                     enum FekitCase case_,
                                     double penalty,
                                     struct FekitReport *out);

/**
 * Solves a manufactured Stokes problem with `Q_{order+1}/Q_order` elements;
 * velocity errors are reported in `l2_error`/`h1_error`.
 *
 * # Safety
 * `tri` must be a live handle and `out` valid writable storage.
 */
enum FekitStatus fekit_stokes_solve(const struct FekitTriangulation *tri,
                                    size_t order,
                                    enum FekitCase case_,
                                    struct FekitReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEKIT_H */
