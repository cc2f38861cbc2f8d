#ifndef CRAFEM_H
#define CRAFEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. `CRAFEM_STATUS_OK` is zero.
 */
typedef enum crafem_status {
  CRAFEM_STATUS_OK = 0,
  CRAFEM_STATUS_NULL_POINTER = 1,
  CRAFEM_STATUS_INVALID_ARGUMENT = 2,
  CRAFEM_STATUS_UNKNOWN_PROBLEM = 3,
  CRAFEM_STATUS_MESH_ERROR = 4,
  CRAFEM_STATUS_SOLVER_ERROR = 5,
  /**
   * Index past the end, or output buffer too small.
   */
  CRAFEM_STATUS_OUT_OF_RANGE = 6,
  /**
   * The objects belong to different problems or meshes.
   */
  CRAFEM_STATUS_MISMATCH = 7,
  CRAFEM_STATUS_INTERNAL = 99,
} crafem_status;

/**
 * Result of an adaptive run.
 */
typedef struct CrafemAfemRun CrafemAfemRun;

/**
 * A triangulation.
 */
typedef struct CrafemMesh CrafemMesh;

/**
 * A catalog problem.
 */
typedef struct CrafemProblem CrafemProblem;

/**
 * A discrete solution together with the problem it solves.
 */
typedef struct CrafemSolution CrafemSolution;

/**
 * Parameters of an adaptive run. Zero limits mean "unlimited".
 */
typedef struct CrafemAfemParams {
  double mu;
  double gamma;
  uintptr_t max_elems;
  uintptr_t max_iters;
  double tol;
} CrafemAfemParams;

/**
 * One iteration of an adaptive run.
 */
typedef struct CrafemAfemRow {
  uintptr_t iter;
  uintptr_t n_elems;
  uintptr_t n_sides;
  uintptr_t n_marked;
  double eta_bar_sq;
  double eta_total_sq;
  double energy;
  /**
   * Energy error against the exact solution, or NaN if none is known.
   */
  double err_ref;
} CrafemAfemRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *crafem_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
uintptr_t crafem_last_error_message(char *buf, uintptr_t len);

/**
 * Looks up a catalog problem by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum crafem_status crafem_problem_new(const char *name, struct CrafemProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from [`crafem_problem_new`], freed once.
 */
void crafem_problem_free(struct CrafemProblem *p);

/**
 * Number of vector components of the unknown (1 for Poisson, 2 for Stokes).
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_problem_components(const struct CrafemProblem *p, uintptr_t *out);

/**
 * The problem's initial mesh refined uniformly `refine_uniform` times.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_problem_mesh(const struct CrafemProblem *p,
                                       uintptr_t refine_uniform,
                                       struct CrafemMesh **out);

/**
 * Parses a mesh in the text format (`vertices n`, coordinates,
 * `triangles m`, vertex triples with the refinement edge opposite the first).
 *
 * # Safety
 * `text` must be NUL-terminated and `out` valid.
 */
enum crafem_status crafem_mesh_parse(const char *text, struct CrafemMesh **out);

/**
 * # Safety
 * `m` must be null or a mesh handle, freed once.
 */
void crafem_mesh_free(struct CrafemMesh *m);

/**
 * Element and side counts.
 *
 * # Safety
 * `m` must be valid; outputs may be null.
 */
enum crafem_status crafem_mesh_counts(const struct CrafemMesh *m,
                                      uintptr_t *elements,
                                      uintptr_t *sides);

/**
 * Midpoint of side `side` written to `xy[0..2]`.
 *
 * # Safety
 * `m` must be valid and `xy` valid for two doubles.
 */
enum crafem_status crafem_mesh_side_midpoint(const struct CrafemMesh *m,
                                             uintptr_t side,
                                             double *xy);

/**
 * New mesh refined uniformly `times` times.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_mesh_refine_uniform(const struct CrafemMesh *m,
                                              uintptr_t times,
                                              struct CrafemMesh **out);

/**
 * Solves the problem on `m`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_solve(const struct CrafemProblem *p,
                                const struct CrafemMesh *m,
                                struct CrafemSolution **out);

/**
 * # Safety
 * `s` must be null or a solution handle, freed once.
 */
void crafem_solution_free(struct CrafemSolution *s);

/**
 * Coefficient (side mean) of component `comp` on side `side`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_solution_side_value(const struct CrafemSolution *s,
                                              uintptr_t side,
                                              uintptr_t comp,
                                              double *out);

/**
 * Copies all coefficients (component-major, one block of `num_sides` per
 * component) into `buf`. `needed` receives the required length; if `len`
 * is smaller, nothing is copied and `CRAFEM_STATUS_OUT_OF_RANGE` is returned.
 *
 * # Safety
 * `buf` must be valid for `len` doubles (or null with `len == 0`).
 */
enum crafem_status crafem_solution_coefficients(const struct CrafemSolution *s,
                                                double *buf,
                                                uintptr_t len,
                                                uintptr_t *needed);

/**
 * Energy `G` of the solution with data weight `gamma`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_solution_energy(const struct CrafemSolution *s,
                                          double gamma,
                                          double *out);

/**
 * Runs the adaptive loop from `m` (or the problem's initial mesh if `m` is
 * null).
 *
 * # Safety
 * Pointers must be valid; `m` may be null.
 */
enum crafem_status crafem_afem_run(const struct CrafemProblem *p,
                                   const struct CrafemMesh *m,
                                   const struct CrafemAfemParams *params,
                                   struct CrafemAfemRun **out);

/**
 * # Safety
 * `r` must be null or a run handle, freed once.
 */
void crafem_afem_free(struct CrafemAfemRun *r);

/**
 * Number of iterations recorded.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_afem_num_rows(const struct CrafemAfemRun *r, uintptr_t *out);

/**
 * Row `i` of the trace.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_afem_row(const struct CrafemAfemRun *r,
                                   uintptr_t i,
                                   struct CrafemAfemRow *out);

/**
 * The final mesh of the run as a new handle.
 *
 * # Safety
 * Pointers must be valid.
 */
enum crafem_status crafem_afem_last_mesh(const struct CrafemAfemRun *r, struct CrafemMesh **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRAFEM_H */
