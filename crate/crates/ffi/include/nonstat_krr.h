/* C interface to the nonstat-krr kernel ridge regression library. */

#ifndef NONSTAT_KRR_H
#define NONSTAT_KRR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible call.
typedef enum NskrrStatus {
  NSKRR_STATUS_OK = 0,
  // A structurally invalid argument (bad range, dimension mismatch).
  NSKRR_STATUS_ERR_ARGUMENT = 1,
  // An input outside the kernel domain or density support.
  NSKRR_STATUS_ERR_DOMAIN = 2,
  // A numeric failure (factorization breakdown, degenerate data).
  NSKRR_STATUS_ERR_NUMERIC = 3,
  // Configuration text failed to parse or validate.
  NSKRR_STATUS_ERR_CONFIG = 4,
  // Filesystem failure while writing artifacts.
  NSKRR_STATUS_ERR_IO = 5,
  // A required pointer was null, or a handle was already consumed.
  NSKRR_STATUS_ERR_NULL = 6,
} NskrrStatus;

// Opaque kernel handle.
typedef struct NskrrKernel NskrrKernel;

// Opaque estimator handle. A failed `nskrr_model_extend` consumes the
// model; the handle then reports `NSKRR_ERR_NULL` until freed.
typedef struct NskrrModel NskrrModel;

// Opaque scenario handle carrying a parsed configuration.
typedef struct NskrrScenario NskrrScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent error on this thread. The pointer
// stays valid until the next failing call on the same thread; do not free
// it.
const char *nskrr_last_error_message(void);

// Create a Gaussian kernel `exp(-((x-a)/width)^2)` on `[lo, hi]`.
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum NskrrStatus nskrr_kernel_gaussian(double width,
                                       double lo,
                                       double hi,
                                       struct NskrrKernel **out);

// Create a spline kernel of order 1 or 2 on `[lo, hi]`.
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum NskrrStatus nskrr_kernel_spline(uint8_t order, double lo, double hi, struct NskrrKernel **out);

// Create a periodic kernel (truncated cosine expansion) on `[lo, hi]`.
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum NskrrStatus nskrr_kernel_periodic(double period,
                                       uint32_t harmonics,
                                       double lo,
                                       double hi,
                                       struct NskrrKernel **out);

// Evaluate `K(x, a)`.
//
// # Safety
// `kernel` must be a live handle from a `nskrr_kernel_*` constructor and
// `out` a valid pointer.
enum NskrrStatus nskrr_kernel_eval(const struct NskrrKernel *kernel,
                                   double x,
                                   double a,
                                   double *out);

// Release a kernel handle. Null is accepted.
//
// # Safety
// `kernel` must have come from a `nskrr_kernel_*` constructor and must not
// be used afterwards.
void nskrr_kernel_free(struct NskrrKernel *kernel);

// The regularization schedule value `gamma0 * t^{-alpha}`; enforces
// `gamma0 > 0` and `0 < alpha < 1/2`.
//
// # Safety
// `out` must be a valid pointer.
enum NskrrStatus nskrr_gamma_at(double gamma0, double alpha, uintptr_t t, double *out);

// Fit the ridge estimator on `len` samples.
//
// # Safety
// `kernel` must be live, `xs` and `ys` must point to `len` readable
// doubles, and `out` must be valid.
enum NskrrStatus nskrr_model_fit(const struct NskrrKernel *kernel,
                                 const double *xs,
                                 const double *ys,
                                 uintptr_t len,
                                 double gamma,
                                 struct NskrrModel **out);

// Empty model for streaming use; extend it one sample at a time.
//
// # Safety
// `kernel` must be live and `out` valid.
enum NskrrStatus nskrr_model_empty(const struct NskrrKernel *kernel, struct NskrrModel **out);

// Append one observation under the new regularization, updating the model
// in place.
//
// # Safety
// `model` must be a live handle.
enum NskrrStatus nskrr_model_extend(struct NskrrModel *model, double x, double y, double gamma);

// Evaluate the estimate at `x`.
//
// # Safety
// `model` must be live and `out` valid.
enum NskrrStatus nskrr_model_predict(const struct NskrrModel *model, double x, double *out);

// Number of support points in the model; zero for a null or consumed
// handle.
//
// # Safety
// `model`, when non-null, must be a live handle.
uintptr_t nskrr_model_len(const struct NskrrModel *model);

// Release a model handle. Null is accepted.
//
// # Safety
// `model` must have come from this library and must not be used afterwards.
void nskrr_model_free(struct NskrrModel *model);

// Parse a scenario from TOML text.
//
// # Safety
// `toml_text` must be a NUL-terminated C string and `out` a valid pointer.
enum NskrrStatus nskrr_scenario_parse(const char *toml_text, struct NskrrScenario **out);

// Total number of samples the scenario's schedule generates.
//
// # Safety
// `scenario`, when non-null, must be a live handle.
uintptr_t nskrr_scenario_total(const struct NskrrScenario *scenario);

// Run the scenario and write report.csv, summary.json, and the grid CSV
// artifacts into `out_dir` (overriding the configured output directory).
//
// # Safety
// `scenario` must be live and `out_dir` a NUL-terminated C string.
enum NskrrStatus nskrr_scenario_run(const struct NskrrScenario *scenario, const char *out_dir);

// Release a scenario handle. Null is accepted.
//
// # Safety
// `scenario` must have come from `nskrr_scenario_parse` and must not be
// used afterwards.
void nskrr_scenario_free(struct NskrrScenario *scenario);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONSTAT_KRR_H */
