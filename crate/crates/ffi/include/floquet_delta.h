#ifndef FLOQUET_DELTA_H
#define FLOQUET_DELTA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum FdStatus {
  FD_STATUS_OK = 0,
  FD_STATUS_NULL_POINTER = 1,
  FD_STATUS_INVALID_PARAMETER = 2,
  FD_STATUS_VERTICAL_CUT = 3,
  FD_STATUS_NOT_FOUND = 4,
  FD_STATUS_NO_CONVERGENCE = 5,
  FD_STATUS_NUMERICAL = 6,
  FD_STATUS_IO = 7,
  FD_STATUS_PANIC = 8,
} FdStatus;

// Values accepted by the `potential` argument of `fd_model_new`.
typedef enum FdPotential {
  FD_POTENTIAL_WELL = 0,
  FD_POTENTIAL_BARRIER = 1,
} FdPotential;

// Opaque model handle: parameters, sheet and initial data.
typedef struct FdModel FdModel;

// Opaque list of resonances returned by `fd_find_resonances`.
typedef struct FdResonanceList FdResonanceList;

// One refined zero of the Wronskian.
typedef struct FdResonance {
  double z_re;
  double z_im;
  double p_re;
  double p_im;
  // -Re p.
  double gamma;
  // 1 on the physical sheet.
  int32_t visible;
  double newton_residual;
} FdResonance;

// psi(x, t) and its three parts.
typedef struct FdPsi {
  double re;
  double im;
  double gamow_re;
  double gamow_im;
  double cut_re;
  double cut_im;
  double f_re;
  double f_im;
} FdPsi;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fd_version(void);

// Message of the last failed call on this thread ("" after a success).
// The pointer stays valid until the next call on the same thread.
const char *fd_last_error_message(void);

// New model on the usual sheet with initial data bump:1.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum FdStatus fd_model_new(double omega, double r, int32_t potential, struct FdModel **out);

// Release a model. Null is ignored.
//
// # Safety
// `model` must come from `fd_model_new` and not be used afterwards.
void fd_model_free(struct FdModel *model);

// Select the sheet, e.g. "usual", "flip:0", "theta=0.2;flip:-1".
//
// # Safety
// `model` must be a live handle and `spec` a NUL-terminated string.
enum FdStatus fd_model_set_sheet(struct FdModel *model, const char *spec);

// Tilt of the cut rays used by `fd_psi`. NaN restores the default.
//
// # Safety
// `model` must be a live handle.
enum FdStatus fd_model_set_theta(struct FdModel *model, double theta);

// Initial data from a compact spec such as "bump:1" or "exp:1:12".
//
// # Safety
// `model` must be a live handle and `spec` a NUL-terminated string.
enum FdStatus fd_model_set_psi0(struct FdModel *model, const char *spec);

// psi0(x) = (1 - (x/M)^2)^2 on [-M, M].
//
// # Safety
// `model` must be a live handle.
enum FdStatus fd_model_set_poly_bump(struct FdModel *model, double support);

// psi0(x) = exp(-rate |x|) cut off at |x| = M.
//
// # Safety
// `model` must be a live handle.
enum FdStatus fd_model_set_truncated_exponential(struct FdModel *model,
                                                 double rate,
                                                 double support);

// Natural cubic spline through (knots[i], re[i] + i im[i]); zero outside.
// `im` may be null for real data.
//
// # Safety
// `model` must be a live handle; `knots` and `re` (and `im` if not null)
// must point to `len` readable doubles.
enum FdStatus fd_model_set_piecewise_cubic(struct FdModel *model,
                                           const double *knots,
                                           const double *re,
                                           const double *im,
                                           size_t len);

// Discrete Wronskian W(z) on the model's sheet.
//
// # Safety
// `model` must be a live handle; `out_re` and `out_im` must be writable.
enum FdStatus fd_wronskian(const struct FdModel *model,
                           double z_re,
                           double z_im,
                           double *out_re,
                           double *out_im);

// All zeros of W in the default region of the model's sheet.
// An empty list is a success; check `fd_resonance_list_len`.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum FdStatus fd_find_resonances(const struct FdModel *model, struct FdResonanceList **out);

// Number of refined zeros in the list (0 for null).
//
// # Safety
// `list` must be null or a live list handle.
size_t fd_resonance_list_len(const struct FdResonanceList *list);

// Argument-principle zero count; equals the length when the search was consistent.
//
// # Safety
// `list` must be null or a live list handle.
int64_t fd_resonance_list_count(const struct FdResonanceList *list);

// 1 when every counted zero was refined.
//
// # Safety
// `list` must be null or a live list handle.
int32_t fd_resonance_list_consistent(const struct FdResonanceList *list);

// Copy entry `index` into `out`.
//
// # Safety
// `list` must be a live list handle and `out` writable.
enum FdStatus fd_resonance_list_get(const struct FdResonanceList *list,
                                    size_t index,
                                    struct FdResonance *out);

// Release a list. Null is ignored.
//
// # Safety
// `list` must come from `fd_find_resonances` and not be used afterwards.
void fd_resonance_list_free(struct FdResonanceList *list);

// psi(x, t) from the resonance expansion. The model's sheet must be the
// physical one. Resonances and residues are cached on the handle until the
// sheet, theta or initial data change.
//
// # Safety
// `model` must be a live handle, not shared across threads during the
// call, and `out` writable.
enum FdStatus fd_psi(struct FdModel *model, double x, double t, struct FdPsi *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOQUET_DELTA_H */
