#ifndef SPARSEDEPTH_H
#define SPARSEDEPTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_PARAMETER = 2,
  SD_STATUS_INVALID_DATA = 3,
  SD_STATUS_DIMENSION_MISMATCH = 4,
  SD_STATUS_EMPTY_SET = 5,
  SD_STATUS_BUFFER_TOO_SMALL = 6,
  SD_STATUS_IO = 7,
  SD_STATUS_PANIC = 8,
} SdStatus;

typedef enum SdScene {
  SD_SCENE_OUTDOOR = 0,
  SD_SCENE_INDOOR = 1,
} SdScene;

/**
 * Depth map with a validity flag per pixel.
 */
typedef struct SdDepth SdDepth;

/**
 * RGB image, 8 bits per channel.
 */
typedef struct SdImage SdImage;

/**
 * Pixel positions to measure.
 */
typedef struct SdPattern SdPattern;

/**
 * Measured samples.
 */
typedef struct SdSamples SdSamples;

/**
 * Superpixel partition.
 */
typedef struct SdSegments SdSegments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *sd_version(void);

/**
 * Message of the last failing call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *sd_last_error_message(void);

/**
 * Copies `width * height * 3` bytes of interleaved RGB.
 *
 * # Safety
 * `rgb` must point to `width * height * 3` readable bytes; `out` must be writable.
 */
enum SdStatus sd_image_new(size_t width, size_t height, const uint8_t *rgb, struct SdImage **out);

/**
 * # Safety
 * `image` must be NULL or a handle from [`sd_image_new`] not yet freed.
 */
void sd_image_free(struct SdImage *image);

/**
 * Copies `width * height` depths. `valid` may be NULL (every pixel valid);
 * otherwise nonzero bytes mark valid pixels.
 *
 * # Safety
 * Buffers must hold `width * height` entries; `out` must be writable.
 */
enum SdStatus sd_depth_new(size_t width,
                           size_t height,
                           const double *depth,
                           const uint8_t *valid,
                           struct SdDepth **out);

/**
 * # Safety
 * `depth` must be NULL or a live depth handle.
 */
void sd_depth_free(struct SdDepth *depth);

/**
 * Writes width and height; either pointer may be NULL.
 *
 * # Safety
 * `depth` must be a live handle.
 */
enum SdStatus sd_depth_dims(const struct SdDepth *depth, size_t *width, size_t *height);

/**
 * Copies the depths (and validity flags when `valid` is not NULL) into
 * caller buffers of `len` entries.
 *
 * # Safety
 * `depth_out` (and `valid` if given) must hold `len` writable entries.
 */
enum SdStatus sd_depth_copy(const struct SdDepth *depth,
                            double *depth_out,
                            uint8_t *valid,
                            size_t len);

/**
 * Over-segments `image` into about `n` superpixels. `compactness <= 0`
 * selects the default.
 *
 * # Safety
 * `image` must be a live handle; `out` must be writable.
 */
enum SdStatus sd_slic(const struct SdImage *image,
                      size_t n,
                      double compactness,
                      struct SdSegments **out);

/**
 * Builds a partition from raw labels; equal labels in disconnected areas
 * become separate segments.
 *
 * # Safety
 * `labels` must hold `width * height` entries; `out` must be writable.
 */
enum SdStatus sd_segments_new(size_t width,
                              size_t height,
                              const uint32_t *labels,
                              struct SdSegments **out);

/**
 * Number of segments; 0 for NULL.
 *
 * # Safety
 * `segments` must be NULL or a live handle.
 */
size_t sd_segments_count(const struct SdSegments *segments);

/**
 * Copies labels `0..count` into a buffer of `len` entries.
 *
 * # Safety
 * `labels` must hold `len` writable entries.
 */
enum SdStatus sd_segments_copy_labels(const struct SdSegments *segments,
                                      uint32_t *labels,
                                      size_t len);

/**
 * # Safety
 * `segments` must be NULL or a live handle.
 */
void sd_segments_free(struct SdSegments *segments);

/**
 * One position per segment, at its center of mass.
 *
 * # Safety
 * `segments` must be a live handle; `out` must be writable.
 */
enum SdStatus sd_pattern_com(const struct SdSegments *segments, struct SdPattern **out);

/**
 * Regular lattice of about `n` positions.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_pattern_grid(size_t width, size_t height, size_t n, struct SdPattern **out);

/**
 * `n` distinct uniformly random positions, reproducible from `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_pattern_random(size_t width,
                                size_t height,
                                size_t n,
                                uint64_t seed,
                                struct SdPattern **out);

/**
 * Number of positions; 0 for NULL.
 *
 * # Safety
 * `pattern` must be NULL or a live handle.
 */
size_t sd_pattern_len(const struct SdPattern *pattern);

/**
 * Copies positions into `xs` and `ys`, each `len` entries.
 *
 * # Safety
 * `xs` and `ys` must hold `len` writable entries.
 */
enum SdStatus sd_pattern_copy(const struct SdPattern *pattern, size_t *xs, size_t *ys, size_t len);

/**
 * # Safety
 * `pattern` must be NULL or a live handle.
 */
void sd_pattern_free(struct SdPattern *pattern);

/**
 * Reads `gt` at every position. `segments` may be NULL; when given, reads
 * on invalid pixels move to a valid pixel of the same segment.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SdStatus sd_execute(const struct SdPattern *pattern,
                         const struct SdDepth *gt,
                         const struct SdSegments *segments,
                         struct SdSamples **out);

/**
 * Number of samples; 0 for NULL.
 *
 * # Safety
 * `samples` must be NULL or a live handle.
 */
size_t sd_samples_len(const struct SdSamples *samples);

/**
 * Sample `index`; output pointers may be NULL.
 *
 * # Safety
 * `samples` must be a live handle.
 */
enum SdStatus sd_samples_get(const struct SdSamples *samples,
                             size_t index,
                             size_t *x,
                             size_t *y,
                             double *depth);

/**
 * # Safety
 * `samples` must be NULL or a live handle.
 */
void sd_samples_free(struct SdSamples *samples);

/**
 * Full adaptive pipeline: about `n` superpixels of `image`, one read of
 * `gt` per superpixel, zero-order fill and log-domain bilateral smoothing.
 * `samples_out` may be NULL.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SdStatus sd_reconstruct_ours(const struct SdImage *image,
                                  const struct SdDepth *gt,
                                  size_t n,
                                  enum SdScene scene,
                                  struct SdDepth **out,
                                  struct SdSamples **samples_out);

/**
 * Piecewise-linear interpolation over the Delaunay triangulation of the
 * samples; outside the hull takes the nearest sample.
 *
 * # Safety
 * `samples` must be a live handle; `out` must be writable.
 */
enum SdStatus sd_reconstruct_bilinear(const struct SdSamples *samples, struct SdDepth **out);

/**
 * Root-mean-square error over the valid pixels of `gt`, in meters. `pred`
 * must be valid wherever `gt` is.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SdStatus sd_rmse(const struct SdDepth *gt, const struct SdDepth *pred, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSEDEPTH_H */
