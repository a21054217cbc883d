#ifndef MZIMESH_H
#define MZIMESH_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MzimeshStatus {
  MZIMESH_STATUS_OK = 0,
  MZIMESH_STATUS_NULL_POINTER = 1,
  MZIMESH_STATUS_INVALID_ARGUMENT = 2,
  MZIMESH_STATUS_UNSUPPORTED_SIZE = 3,
  MZIMESH_STATUS_DIMENSION = 4,
  MZIMESH_STATUS_NOT_ACCESSIBLE = 5,
  MZIMESH_STATUS_NUMERICAL = 6,
  MZIMESH_STATUS_IO = 7,
  MZIMESH_STATUS_PARSE = 8,
  MZIMESH_STATUS_PANIC = 9,
} MzimeshStatus;

typedef enum MzimeshKind {
  MZIMESH_KIND_RECK = 0,
  MZIMESH_KIND_DIAMOND = 1,
  MZIMESH_KIND_CLEMENTS = 2,
  MZIMESH_KIND_BOKUN = 3,
} MzimeshKind;

/**
 * Opaque mesh with its current phase settings.
 */
typedef struct MzimeshMesh MzimeshMesh;

/**
 * Opaque trained network.
 */
typedef struct MzimeshModel MzimeshModel;

typedef struct MzimeshStructure {
  size_t mzi_count;
  size_t depth;
  size_t min_path;
  size_t max_path;
  size_t accessible_count;
} MzimeshStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *mzimesh_last_error(void);

/**
 * Builds an `n`-port mesh with every MZI at θ = φ = 0.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MzimeshStatus mzimesh_mesh_new(enum MzimeshKind kind, size_t n, struct MzimeshMesh **out);

/**
 * # Safety
 * `mesh` must be null or a handle from [`mzimesh_mesh_new`] not yet freed.
 */
void mzimesh_mesh_free(struct MzimeshMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle; `out` must be valid for one write.
 */
enum MzimeshStatus mzimesh_mesh_mzi_count(const struct MzimeshMesh *mesh, size_t *out);

/**
 * Number of main (data) ports.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must be valid for one write.
 */
enum MzimeshStatus mzimesh_mesh_ports(const struct MzimeshMesh *mesh, size_t *out);

/**
 * # Safety
 * `mesh` must be a live handle; `out` must be valid for one write.
 */
enum MzimeshStatus mzimesh_mesh_structure(const struct MzimeshMesh *mesh,
                                          struct MzimeshStructure *out);

/**
 * Sets θ and φ of every MZI; both arrays hold `count` entries, which must
 * equal the MZI count.
 *
 * # Safety
 * `mesh` must be a live handle; `theta` and `phi` must point to `count`
 * doubles each.
 */
enum MzimeshStatus mzimesh_mesh_set_phases(struct MzimeshMesh *mesh,
                                           const double *theta,
                                           const double *phi,
                                           size_t count);

/**
 * Writes the main-port transfer matrix row-major as separate real and
 * imaginary parts; both buffers hold `len` = ports² doubles.
 *
 * # Safety
 * `mesh` must be a live handle; `re` and `im` must be writable for `len`
 * doubles each.
 */
enum MzimeshStatus mzimesh_mesh_transfer(const struct MzimeshMesh *mesh,
                                         double *re,
                                         double *im,
                                         size_t len);

/**
 * Effective θ of one MZI recovered through its monitoring route. Fails
 * with `NotAccessible` when the MZI has no such route.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must be valid for one write.
 */
enum MzimeshStatus mzimesh_mesh_monitor_theta(const struct MzimeshMesh *mesh,
                                              size_t mzi,
                                              double *out);

/**
 * Loads a model saved by the command-line `train` step.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for one write.
 */
enum MzimeshStatus mzimesh_model_load(const char *path, struct MzimeshModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`mzimesh_model_load`] not yet freed.
 */
void mzimesh_model_free(struct MzimeshModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be valid for one write.
 */
enum MzimeshStatus mzimesh_model_features(const struct MzimeshModel *model, size_t *out);

/**
 * Noise-free class prediction for one real feature vector, which is
 * normalized to unit power before encoding.
 *
 * # Safety
 * `model` must be a live handle; `features` must point to `len` doubles;
 * `out` must be valid for one write.
 */
enum MzimeshStatus mzimesh_model_predict(const struct MzimeshModel *model,
                                         const double *features,
                                         size_t len,
                                         size_t *out);

/**
 * Static and total energy per operation in joules for an `n`-port mesh
 * with default heater and timing parameters except `p_pi` (W) and `vr`
 * (operations per second), reprogrammed `f_w` times per second.
 *
 * # Safety
 * `e_static_out` and `e_total_out` must be valid for one write each.
 */
enum MzimeshStatus mzimesh_energy(enum MzimeshKind kind,
                                  size_t n,
                                  double p_pi,
                                  double vr,
                                  double f_w,
                                  double *e_static_out,
                                  double *e_total_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MZIMESH_H */
