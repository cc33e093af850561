#ifndef CASSI_GSM_H
#define CASSI_GSM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CassiStatus {
  CASSI_STATUS_OK = 0,
  CASSI_STATUS_NULL_POINTER = 1,
  CASSI_STATUS_INVALID_ARGUMENT = 2,
  CASSI_STATUS_IO = 3,
  CASSI_STATUS_SHAPE = 4,
  CASSI_STATUS_DIVERGENCE = 5,
  CASSI_STATUS_PANIC = 6,
} CassiStatus;

// Hyperspectral cube, band-major `f32` samples.
typedef struct CassiCube CassiCube;

// Coded aperture transmittances in `[0, 1]`, row-major.
typedef struct CassiMask CassiMask;

// Sensor image plus the dispersion geometry that produced it.
typedef struct CassiMeasurement CassiMeasurement;

// Plain-data solver settings; obtain defaults from
// [`cassi_solver_options_default`].
typedef struct CassiSolverOptions {
  size_t stages;
  size_t inner_steps;
  // Initial backtracking step size.
  double delta0;
  // Backtracking shrink factor in `(0, 1)`.
  double shrink;
  double sigma;
  // Jeffreys prior stabiliser.
  double eps;
  size_t q;
  double bandwidth;
  // Nonzero to start from zero instead of the scaled adjoint.
  int32_t zero_init;
} CassiSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null after a
// success. Valid until the next call into this library on the same thread.
const char *cassi_last_error(void);

// Copy `height * width * bands` samples from `data` (band-major), or zeros
// if `data` is null.
//
// # Safety
// `data` must be null or point to that many readable floats; `out` must be
// writable.
enum CassiStatus cassi_cube_new(size_t height,
                                size_t width,
                                size_t bands,
                                const float *data,
                                struct CassiCube **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CassiStatus cassi_cube_load(const char *path, struct CassiCube **out);

// # Safety
// `cube` must be a live handle and `path` a NUL-terminated string.
enum CassiStatus cassi_cube_save(const struct CassiCube *cube, const char *path);

// # Safety
// `cube` must be a live handle; the out pointers must be writable.
enum CassiStatus cassi_cube_dims(const struct CassiCube *cube,
                                 size_t *height,
                                 size_t *width,
                                 size_t *bands);

// Band-major samples owned by the handle; null if `cube` is null.
//
// # Safety
// `cube` must be null or a live handle. The pointer dies with the handle.
const float *cassi_cube_data(const struct CassiCube *cube);

// # Safety
// `cube` must be null or a handle not yet freed.
void cassi_cube_free(struct CassiCube *cube);

// # Safety
// `data` must point to `height * width` readable floats; `out` must be
// writable.
enum CassiStatus cassi_mask_new(size_t height,
                                size_t width,
                                const float *data,
                                struct CassiMask **out);

// Seeded binary mask with roughly `fill` of its pixels open.
//
// # Safety
// `out` must be writable.
enum CassiStatus cassi_mask_random_binary(size_t height,
                                          size_t width,
                                          double fill,
                                          uint64_t seed,
                                          struct CassiMask **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CassiStatus cassi_mask_load(const char *path, struct CassiMask **out);

// # Safety
// `mask` must be a live handle and `path` a NUL-terminated string.
enum CassiStatus cassi_mask_save(const struct CassiMask *mask, const char *path);

// # Safety
// `mask` must be null or a handle not yet freed.
void cassi_mask_free(struct CassiMask *mask);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CassiStatus cassi_measurement_load(const char *path, struct CassiMeasurement **out);

// # Safety
// `meas` must be a live handle and `path` a NUL-terminated string.
enum CassiStatus cassi_measurement_save(const struct CassiMeasurement *meas, const char *path);

// Sensor height and width, dispersion step and band count.
//
// # Safety
// `meas` must be a live handle; the out pointers must be writable.
enum CassiStatus cassi_measurement_dims(const struct CassiMeasurement *meas,
                                        size_t *height,
                                        size_t *width,
                                        size_t *step,
                                        size_t *bands);

// Row-major sensor samples owned by the handle; null if `meas` is null.
//
// # Safety
// `meas` must be null or a live handle. The pointer dies with the handle.
const float *cassi_measurement_data(const struct CassiMeasurement *meas);

// # Safety
// `meas` must be null or a handle not yet freed.
void cassi_measurement_free(struct CassiMeasurement *meas);

// Seeded synthetic scene of Gaussian blobs.
//
// # Safety
// `out` must be writable.
enum CassiStatus cassi_scene_generate(size_t height,
                                      size_t width,
                                      size_t bands,
                                      size_t blobs,
                                      uint64_t seed,
                                      struct CassiCube **out);

// Forward model: mask, disperse by `step` pixels per band, integrate.
//
// # Safety
// `cube` and `mask` must be live handles; `out` must be writable.
enum CassiStatus cassi_simulate(const struct CassiCube *cube,
                                const struct CassiMask *mask,
                                size_t step,
                                struct CassiMeasurement **out);

// Transpose of the forward model.
//
// # Safety
// `meas` and `mask` must be live handles; `out` must be writable.
enum CassiStatus cassi_adjoint(const struct CassiMeasurement *meas,
                               const struct CassiMask *mask,
                               struct CassiCube **out);

// Poisson photon noise at `bits` of depth, full scale at the image maximum.
//
// # Safety
// `meas` must be a live handle; `out` must be writable.
enum CassiStatus cassi_add_shot_noise(const struct CassiMeasurement *meas,
                                      uint32_t bits,
                                      uint64_t seed,
                                      struct CassiMeasurement **out);

// Additive Gaussian noise, clamped at zero.
//
// # Safety
// `meas` must be a live handle; `out` must be writable.
enum CassiStatus cassi_add_gaussian_noise(const struct CassiMeasurement *meas,
                                          double sigma,
                                          uint64_t seed,
                                          struct CassiMeasurement **out);

struct CassiSolverOptions cassi_solver_options_default(void);

// Reconstruct with the Jeffreys-prior solver. Null `options` means defaults.
//
// # Safety
// `meas` and `mask` must be live handles, `options` null or readable, and
// `out` writable.
enum CassiStatus cassi_reconstruct(const struct CassiMeasurement *meas,
                                   const struct CassiMask *mask,
                                   const struct CassiSolverOptions *options,
                                   struct CassiCube **out);

// Whole-cube PSNR in dB; `+inf` for identical cubes.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum CassiStatus cassi_psnr(const struct CassiCube *a,
                            const struct CassiCube *b,
                            double peak,
                            double *out);

// Band-averaged SSIM.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum CassiStatus cassi_ssim(const struct CassiCube *a,
                            const struct CassiCube *b,
                            double peak,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASSI_GSM_H */
