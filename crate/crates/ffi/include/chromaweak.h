#ifndef CHROMAWEAK_H
#define CHROMAWEAK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CwInterpolation {
  CW_INTERPOLATION_BARYCENTRIC = 0,
  CW_INTERPOLATION_NEAREST_VERTEX = 1,
} CwInterpolation;

// Result code of every fallible call.
typedef enum CwStatus {
  CW_STATUS_OK = 0,
  CW_STATUS_NULL_POINTER = 1,
  CW_STATUS_INVALID_ARGUMENT = 2,
  CW_STATUS_CONFIG = 3,
  CW_STATUS_IO = 4,
  CW_STATUS_ARCHIVE = 5,
  CW_STATUS_UNCOVERED = 6,
  CW_STATUS_INTERNAL = 7,
} CwStatus;

typedef enum CwWhite {
  CW_WHITE_D65 = 0,
  CW_WHITE_D50 = 1,
} CwWhite;

// Opaque compensation or simulation configuration.
typedef struct CwCompensator CwCompensator;

// Per-run pixel counts.
typedef struct CwReport {
  uint64_t pixels;
  uint64_t mapped;
  uint64_t clamped;
  uint64_t fallback;
  uint64_t clipped;
  uint64_t lightness_clamped;
} CwReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cw_version(void);

// Message of the last failed call on this thread, or NULL after a
// successful call. Valid until the next call on the same thread.
const char *cw_last_error_message(void);

// Creates a configuration for `mode` ("2d", "2d+1d", "3d",
// "simulate-2d", "simulate-2d+1d", "simulate-3d").
//
// # Safety
// `mode` must be a NUL-terminated string and `out` a writable pointer.
enum CwStatus cw_compensator_new(const char *mode, struct CwCompensator **out);

// # Safety
// `h` must come from [`cw_compensator_new`] and not be used afterwards.
void cw_compensator_free(struct CwCompensator *h);

// Loads a map or lightness archive from memory. 2D map archives add
// one map per lightness plane; a 3D archive sets the 3D map.
//
// # Safety
// `data` must point to `len` readable bytes.
enum CwStatus cw_compensator_load_bytes(struct CwCompensator *h, const uint8_t *data, size_t len);

// Same as [`cw_compensator_load_bytes`], reading from a file.
//
// # Safety
// `path` must be a NUL-terminated string.
enum CwStatus cw_compensator_load_file(struct CwCompensator *h, const char *path);

// # Safety
// `h` must be a live handle.
enum CwStatus cw_compensator_set_interpolation(struct CwCompensator *h, enum CwInterpolation mode);

// # Safety
// `h` must be a live handle.
enum CwStatus cw_compensator_set_white(struct CwCompensator *h, enum CwWhite white);

// Checks that every map the mode needs is loaded.
//
// # Safety
// `h` must be a live handle.
enum CwStatus cw_compensator_validate(struct CwCompensator *h);

// Processes `width * height` packed RGB8 pixels from `input` into
// `output` (same size, may alias). `report` may be NULL.
//
// # Safety
// `input` and `output` must each hold `width * height * 3` bytes.
enum CwStatus cw_compensator_apply(struct CwCompensator *h,
                                   const uint8_t *input,
                                   uint32_t width,
                                   uint32_t height,
                                   uint8_t *output,
                                   struct CwReport *report);

// Maps one RGB8 color.
//
// # Safety
// `input` and `output` must each hold 3 bytes.
enum CwStatus cw_compensator_map_color(struct CwCompensator *h,
                                       const uint8_t *input,
                                       uint8_t *output);

// Converts an RGB8 color to `[L, u, v]`.
//
// # Safety
// `rgb` must hold 3 bytes and `luv` 3 doubles.
enum CwStatus cw_srgb_to_luv(const uint8_t *rgb, enum CwWhite white, double *luv);

// Converts `[L, u, v]` to RGB8. `clipped` (may be NULL) receives 1 when
// the color was outside the sRGB gamut.
//
// # Safety
// `luv` must hold 3 doubles and `rgb` 3 bytes.
enum CwStatus cw_luv_to_srgb(const double *luv, enum CwWhite white, uint8_t *rgb, int32_t *clipped);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHROMAWEAK_H */
