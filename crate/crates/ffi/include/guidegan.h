#ifndef GUIDEGAN_H
#define GUIDEGAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GgStatus {
  GG_STATUS_OK = 0,
  GG_STATUS_NULL_POINTER = 1,
  GG_STATUS_INVALID_ARGUMENT = 2,
  GG_STATUS_SHAPE_MISMATCH = 3,
  GG_STATUS_IO = 4,
  GG_STATUS_FORMAT = 5,
  GG_STATUS_NUMERIC = 6,
  GG_STATUS_BUFFER_TOO_SMALL = 7,
  GG_STATUS_PANIC = 8,
} GgStatus;

/**
 * Trained encoder.
 */
typedef struct GgEncoder GgEncoder;

/**
 * Trained generator and discriminator.
 */
typedef struct GgGan GgGan;

/**
 * Subcategory prototype.
 */
typedef struct GgPrototype GgPrototype;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t gg_last_error(char *buf, size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GgStatus gg_gan_load(const char *path, struct GgGan **out);

/**
 * # Safety
 * `gan` must be null or a handle from [`gg_gan_load`] not yet freed.
 */
void gg_gan_free(struct GgGan *gan);

/**
 * Latent dimension, or 0 for a null handle.
 *
 * # Safety
 * `gan` must be null or a live handle.
 */
size_t gg_gan_latent_dim(const struct GgGan *gan);

/**
 * Values per generated sample, or 0 for a null handle.
 *
 * # Safety
 * `gan` must be null or a live handle.
 */
size_t gg_gan_sample_len(const struct GgGan *gan);

/**
 * Generates `count` data-space samples from `count × latent_dim` latents
 * into `out` (`count × sample_len` values).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum GgStatus gg_gan_generate(const struct GgGan *gan,
                              const double *latents,
                              size_t count,
                              double *out,
                              size_t out_len);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GgStatus gg_encoder_load(const char *path, struct GgEncoder **out);

/**
 * # Safety
 * `encoder` must be null or a handle from [`gg_encoder_load`] not yet freed.
 */
void gg_encoder_free(struct GgEncoder *encoder);

/**
 * 1 when the encoder was trained against this generator, 0 otherwise.
 *
 * # Safety
 * Both handles must be live.
 */
int32_t gg_encoder_matches(const struct GgEncoder *encoder, const struct GgGan *gan);

/**
 * Encodes `count` model-space samples into `out` (`count × latent_dim`).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum GgStatus gg_encoder_encode(const struct GgEncoder *encoder,
                                const double *samples,
                                size_t count,
                                double *out,
                                size_t out_len);

/**
 * Builds a prototype from `count` data-space exemplars, normalized with
 * the generator's statistics before encoding.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum GgStatus gg_prototype_build(const struct GgGan *gan,
                                 const struct GgEncoder *encoder,
                                 const double *exemplars,
                                 size_t count,
                                 double alpha,
                                 struct GgPrototype **out);

/**
 * # Safety
 * `proto` must be null or a handle from [`gg_prototype_build`] not yet freed.
 */
void gg_prototype_free(struct GgPrototype *proto);

/**
 * Prototype dimension, or 0 for a null handle.
 *
 * # Safety
 * `proto` must be null or a live handle.
 */
size_t gg_prototype_dim(const struct GgPrototype *proto);

/**
 * Copies μ and σ (each `dim` values) into `mu` and `sigma`.
 *
 * # Safety
 * `mu` and `sigma` must each hold `len` writable values.
 */
enum GgStatus gg_prototype_stats(const struct GgPrototype *proto,
                                 double *mu,
                                 double *sigma,
                                 size_t len);

/**
 * Draws `count` latents from the prototype into `out` (`count × dim`).
 *
 * # Safety
 * `out` must hold `out_len` writable values.
 */
enum GgStatus gg_prototype_sample(const struct GgPrototype *proto,
                                  size_t count,
                                  uint64_t seed,
                                  double *out,
                                  size_t out_len);

/**
 * Full guidance: `n` data-space exemplars in, `count` data-space samples
 * out (`count × sample_len`).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum GgStatus gg_guide(const struct GgGan *gan,
                       const struct GgEncoder *encoder,
                       const double *exemplars,
                       size_t n,
                       double alpha,
                       size_t count,
                       uint64_t seed,
                       double *out,
                       size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GUIDEGAN_H */
