#ifndef TOKCAST_H
#define TOKCAST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TcStatus {
  TC_OK = 0,
  TC_NULL_POINTER = 1,
  TC_INVALID_ARGUMENT = 2,
  // Input rejected by the library (bad config, short series, ...).
  TC_VALIDATION = 3,
  // I/O or numerical failure.
  TC_RUNTIME = 4,
  TC_PANIC = 5,
} TcStatus;

// Squared or absolute loss for [`tc_dm_test`].
typedef enum TcLoss {
  TC_LOSS_SQUARED = 0,
  TC_LOSS_ABSOLUTE = 1,
} TcLoss;

// Quantile forecast: one row per level, `horizon` values each.
typedef struct TcForecast TcForecast;

// A loaded checkpoint.
typedef struct TcModel TcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Load a checkpoint file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TcStatus tc_model_load(const char *path, struct TcModel **out);

// # Safety
// `model` must come from [`tc_model_load`] and not be used afterwards. NULL is ignored.
void tc_model_free(struct TcModel *model);

// Largest horizon the model can decode.
//
// # Safety
// `model` must be NULL or a live handle.
uintptr_t tc_model_horizon_limit(const struct TcModel *model);

// Sample `samples` paths from the model and summarise them at `levels`
// (NULL for the default grid). `temperature` 0 decodes greedily.
//
// # Safety
// `context` must hold `len` doubles, `levels` `n_levels` doubles (or be NULL),
// and `out` must be a valid pointer.
enum TcStatus tc_forecast_model(const struct TcModel *model,
                                const double *context,
                                uintptr_t len,
                                uintptr_t horizon,
                                const double *levels,
                                uintptr_t n_levels,
                                uintptr_t samples,
                                double temperature,
                                uint64_t seed,
                                struct TcForecast **out);

// Forecast with a statistical baseline: "snm", "csba", "npts" or "ets_lite",
// using default baseline settings (season 24).
//
// # Safety
// As for [`tc_forecast_model`]; `baseline` must be a NUL-terminated string.
enum TcStatus tc_forecast_baseline(const char *baseline,
                                   const double *context,
                                   uintptr_t len,
                                   uintptr_t horizon,
                                   const double *levels,
                                   uintptr_t n_levels,
                                   uint64_t seed,
                                   struct TcForecast **out);

// # Safety
// `forecast` must come from a `tc_forecast_*` call and not be used afterwards. NULL is ignored.
void tc_forecast_free(struct TcForecast *forecast);

// # Safety
// `forecast` must be NULL or a live handle.
uintptr_t tc_forecast_horizon(const struct TcForecast *forecast);

// # Safety
// `forecast` must be NULL or a live handle.
uintptr_t tc_forecast_level_count(const struct TcForecast *forecast);

// Copy the quantile levels into `out`, which must have room for `len` values.
//
// # Safety
// `out` must be writable for `len` doubles.
enum TcStatus tc_forecast_levels(const struct TcForecast *forecast, double *out, uintptr_t len);

// Copy the row for level index `level` (`horizon` values).
//
// # Safety
// `out` must be writable for `len` doubles.
enum TcStatus tc_forecast_values(const struct TcForecast *forecast,
                                 uintptr_t level,
                                 double *out,
                                 uintptr_t len);

// Copy the point forecast (the median row).
//
// # Safety
// `out` must be writable for `len` doubles.
enum TcStatus tc_forecast_point(const struct TcForecast *forecast, double *out, uintptr_t len);

// CRPS of `forecast` against `len` actual values.
//
// # Safety
// `actual` must hold `len` doubles and `out` be writable.
enum TcStatus tc_metric_crps(const double *actual,
                             uintptr_t len,
                             const struct TcForecast *forecast,
                             double *out);

// # Safety
// `actual` and `predicted` must hold `len` doubles and `out` be writable.
enum TcStatus tc_metric_rmse(const double *actual,
                             const double *predicted,
                             uintptr_t len,
                             double *out);

// # Safety
// `actual` and `predicted` must hold `len` doubles and `out` be writable.
enum TcStatus tc_metric_mae(const double *actual,
                            const double *predicted,
                            uintptr_t len,
                            double *out);

// Diebold-Mariano test of two `len`-long error series at horizon `h`.
// A positive statistic means the first model has the larger loss.
//
// # Safety
// `e1` and `e2` must hold `len` doubles; `statistic`, `p_value` and `reject` must be writable.
enum TcStatus tc_dm_test(const double *e1,
                         const double *e2,
                         uintptr_t len,
                         uintptr_t h,
                         enum TcLoss loss,
                         double *statistic,
                         double *p_value,
                         bool *reject);

// Message for the last failed call on this thread, or NULL. Valid until the
// next library call on the same thread.
const char *tc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *tc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOKCAST_H */
