#ifndef COMPDEPTH_H
#define COMPDEPTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum CdStatus {
  CdStatus_Ok = 0,
  CdStatus_NullPointer = 1,
  CdStatus_InvalidArgument = 2,
  // Singular or non-positive geometric quantity.
  CdStatus_Geometry = 3,
  CdStatus_Parse = 4,
  CdStatus_Fusion = 5,
  CdStatus_Metrics = 6,
  CdStatus_Panic = 7,
} CdStatus;

// Output format selector for reports.
typedef enum CdFormat {
  CdFormat_Json = 0,
  CdFormat_Csv = 1,
} CdFormat;

// Opaque horizon heatmap.
typedef struct CdHeatmap CdHeatmap;

// Opaque set of parsed prediction records.
typedef struct CdPredictions CdPredictions;

typedef struct CdIntrinsics {
  double fx;
  double fy;
  double cu;
  double cv;
} CdIntrinsics;

// Image line `v = k_h u + b_h`.
typedef struct CdHorizon {
  double k_h;
  double b_h;
} CdHorizon;

// Unit-normal ground plane `a x + b y + c z + cam_height = 0`.
typedef struct CdPlane {
  double a;
  double b;
  double c;
  double cam_height;
} CdPlane;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cd_version(void);

// Byte length of the calling thread's last error message, excluding the
// terminating NUL; 0 when the last call succeeded.
uintptr_t cd_last_error_length(void);

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `len - 1` bytes). Returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
uintptr_t cd_last_error_message(char *buf, uintptr_t len);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void cd_string_free(char *s);

// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_project(const struct CdIntrinsics *k,
                         double x,
                         double y,
                         double z,
                         double *u_out,
                         double *v_out);

// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_depth_from_elevation(const struct CdIntrinsics *k,
                                      double y,
                                      double v_b,
                                      double eps_den,
                                      double *z_out);

// Depth from 3D height `h` and the projected bottom/top rows.
//
// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_z_key(const struct CdIntrinsics *k,
                       double h,
                       double v_b,
                       double v_t,
                       double eps_den,
                       double *z_out);

// Depth from the ground elevation and the box's vertical midpoint row.
//
// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_z_comp(const struct CdIntrinsics *k,
                        double y_glo,
                        double h,
                        double v_b,
                        double v_t,
                        double eps_den,
                        double *z_out);

// Depth from the ground elevation and the top row.
//
// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_z_alt(const struct CdIntrinsics *k,
                       double y_glo,
                       double h,
                       double v_t,
                       double eps_den,
                       double *z_out);

// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_horizon_to_plane(const struct CdIntrinsics *k,
                                  struct CdHorizon horizon,
                                  double cam_height,
                                  struct CdPlane *plane_out);

// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_plane_to_horizon(const struct CdIntrinsics *k,
                                  struct CdPlane plane,
                                  double eps_den,
                                  struct CdHorizon *horizon_out);

// Elevation where the ray through `(u_b, v_b)` meets `plane`.
//
// # Safety
// Pointers must be valid for reads/writes of their types.
enum CdStatus cd_y_global(const struct CdIntrinsics *k,
                          struct CdPlane plane,
                          double u_b,
                          double v_b,
                          double eps_den,
                          double *y_out);

// Inverse-sigma weighted fusion of `n` branches. `weights_out` may be null;
// otherwise it receives `n` weights.
//
// # Safety
// `z` and `sigma` must hold `n` values; `weights_out` must be null or hold `n`.
enum CdStatus cd_soft_fuse(const double *z,
                           const double *sigma,
                           uintptr_t n,
                           double *z_out,
                           double *weights_out);

// # Safety
// `pred` and `truth` must hold `n` values.
enum CdStatus cd_mae(const double *pred, const double *truth, uintptr_t n, double *out_mae);

// Percentage of samples whose errors have strictly opposite signs.
//
// # Safety
// `errors_a` and `errors_b` must hold `n` values.
enum CdStatus cd_esop(const double *errors_a, const double *errors_b, uintptr_t n, double *out_pct);

// # Safety
// `cs_out` must be valid for writes.
enum CdStatus cd_complementarity_score(double esop_pct, double mae, double *cs_out);

// Reflection of `z_hat` about `z_star`.
double cd_flip(double z_hat, double z_star);

// Rasterizes `horizon` into a new heatmap. Returns null for a zero-sized
// image.
struct CdHeatmap *cd_heatmap_rasterize(struct CdHorizon horizon,
                                       uintptr_t width,
                                       uintptr_t height,
                                       uintptr_t radius);

// Wraps `width * height` row-major values (clamped into [0, 1]).
//
// # Safety
// `data` must hold `width * height` values; `heatmap_out` must be valid.
enum CdStatus cd_heatmap_from_data(const double *data,
                                   uintptr_t width,
                                   uintptr_t height,
                                   struct CdHeatmap **heatmap_out);

// # Safety
// `m` must be null or a live handle from this library.
void cd_heatmap_free(struct CdHeatmap *m);

// # Safety
// `m` must be a live handle; out pointers must be valid.
enum CdStatus cd_heatmap_dims(const struct CdHeatmap *m,
                              uintptr_t *width_out,
                              uintptr_t *height_out);

// Value at `(row, col)`; NaN when out of range or `m` is null.
//
// # Safety
// `m` must be null or a live handle.
double cd_heatmap_get(const struct CdHeatmap *m, uintptr_t row, uintptr_t col);

// Column-argmax line fit. `degraded_out` (nullable) is set to 1 when most
// supporting columns lie outside the image.
//
// # Safety
// `m` must be a live handle; out pointers must be valid or null where allowed.
enum CdStatus cd_heatmap_fit(const struct CdHeatmap *m,
                             struct CdHorizon *horizon_out,
                             int32_t *degraded_out);

// Parses JSON-lines prediction records.
//
// # Safety
// `jsonl` must be a NUL-terminated UTF-8 string; `out_handle` must be valid.
enum CdStatus cd_predictions_parse(const char *jsonl, struct CdPredictions **out_handle);

// Number of records; 0 for a null handle.
//
// # Safety
// `p` must be null or a live handle.
uintptr_t cd_predictions_len(const struct CdPredictions *p);

// # Safety
// `p` must be null or a live handle from this library.
void cd_predictions_free(struct CdPredictions *p);

// Complementarity report over records that carry `z_star`. The report text
// is returned in `*report_out` and must be released with [`cd_string_free`].
//
// # Safety
// `p` must be a live handle; `report_out` must be valid.
enum CdStatus cd_predictions_evaluate(const struct CdPredictions *p,
                                      enum CdFormat format,
                                      char **report_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMPDEPTH_H */
