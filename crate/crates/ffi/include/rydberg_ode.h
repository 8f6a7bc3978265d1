#ifndef RYDBERG_ODE_H
#define RYDBERG_ODE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RydStatus {
  RYD_STATUS_OK = 0,
  RYD_STATUS_NULL_POINTER = 1,
  RYD_STATUS_INVALID_ARGUMENT = 2,
  RYD_STATUS_IO = 3,
  RYD_STATUS_PARSE = 4,
  RYD_STATUS_EXPORT_REFUSED = 5,
  RYD_STATUS_BUFFER_TOO_SMALL = 6,
  RYD_STATUS_PANIC = 99,
} RydStatus;

/**
 * Atom register handle.
 */
typedef struct RydGrid RydGrid;

/**
 * Trained classifier handle loaded from a checkpoint.
 */
typedef struct RydModel RydModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ryd_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ryd_last_error(void);

/**
 * Build a named register (`"chain"`, `"ring"`, `"square"`, `"triangle"`).
 *
 * # Safety
 * `kind` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RydStatus ryd_grid_new(const char *kind,
                            size_t n_atoms,
                            double spacing_um,
                            struct RydGrid **out);

/**
 * # Safety
 * `grid` must come from [`ryd_grid_new`] and not be used afterwards.
 */
void ryd_grid_free(struct RydGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle and `out` a valid pointer.
 */
enum RydStatus ryd_grid_n_atoms(const struct RydGrid *grid, size_t *out);

/**
 * Write `x0, y0, x1, y1, …` (µm) into `out`, which holds `len` doubles.
 *
 * # Safety
 * `grid` must be a live handle and `out` must point to `len` doubles.
 */
enum RydStatus ryd_grid_positions(const struct RydGrid *grid, double *out, size_t len);

/**
 * Evolve `|0…0⟩` under constant Rabi frequency and global detuning
 * (rad/µs) for `duration_us`, writing each atom's Rydberg probability.
 *
 * # Safety
 * `grid` must be a live handle and `out` must point to `len` doubles.
 */
enum RydStatus ryd_simulate_constant(const struct RydGrid *grid,
                                     double rabi,
                                     double detuning,
                                     double duration_us,
                                     double *out,
                                     size_t len);

/**
 * Load a trained checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RydStatus ryd_model_load(const char *path, struct RydModel **out);

/**
 * # Safety
 * `model` must come from [`ryd_model_load`] and not be used afterwards.
 */
void ryd_model_free(struct RydModel *model);

/**
 * Shape of a loaded model. Any output pointer may be null.
 *
 * # Safety
 * `model` must be a live handle; non-null outputs must be valid.
 */
enum RydStatus ryd_model_info(const struct RydModel *model,
                              size_t *n_atoms,
                              size_t *n_intervals,
                              size_t *n_trainable,
                              size_t *n_features);

/**
 * Soft label in `[0, 1]` for one raw feature vector.
 *
 * # Safety
 * `model` must be a live handle, `features` must point to `n_features`
 * doubles and `out` must be valid.
 */
enum RydStatus ryd_model_predict(const struct RydModel *model,
                                 const double *features,
                                 size_t n_features,
                                 double *out);

/**
 * Analog program JSON for one raw feature vector. The string is owned by
 * the caller and must be released with [`ryd_string_free`].
 *
 * # Safety
 * `model` must be a live handle, `features` must point to `n_features`
 * doubles and `out` must be valid.
 */
enum RydStatus ryd_model_export(const struct RydModel *model,
                                const double *features,
                                size_t n_features,
                                char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ryd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RYDBERG_ODE_H */
