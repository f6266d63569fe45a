#ifndef KEHMODE_H
#define KEHMODE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Transportation modes; values match the library's class indices.
 */
typedef enum KehMode {
  KEH_MODE_BUS = 0,
  KEH_MODE_TRAIN = 1,
  KEH_MODE_CAR = 2,
  KEH_MODE_FERRY = 3,
  KEH_MODE_LIGHT_RAIL = 4,
} KehMode;

/**
 * Status codes returned by every fallible call.
 */
typedef enum KehStatus {
  KEH_STATUS_OK = 0,
  KEH_STATUS_NULL_POINTER = 1,
  KEH_STATUS_INVALID_PARAMETER = 2,
  KEH_STATUS_INVALID_INPUT = 3,
  KEH_STATUS_IO = 4,
  KEH_STATUS_PARSE = 5,
  KEH_STATUS_TRACE_TOO_SHORT = 6,
  KEH_STATUS_NO_SIGNAL = 7,
  KEH_STATUS_NOT_CONVERGED = 8,
  KEH_STATUS_BUFFER_TOO_SMALL = 9,
  KEH_STATUS_PANIC = 10,
} KehStatus;

/**
 * A trained model loaded from a model file.
 */
typedef struct KehModel KehModel;

/**
 * Outcome of classifying a feature vector or a whole trace.
 */
typedef struct KehResult KehResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *keh_last_error_message(void);

/**
 * Static, NUL-terminated name of a mode (`"bus"`, `"light_rail"`, ...).
 */
const char *keh_mode_name(enum KehMode mode);

/**
 * Loads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KehStatus keh_model_load(const char *path, struct KehModel **out);

/**
 * Parses a model from `len` bytes of JSON.
 *
 * # Safety
 * `json` must point to `len` readable bytes and `out` must be valid.
 */
enum KehStatus keh_model_from_json(const char *json, size_t len, struct KehModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from a `keh_model_*` constructor and not be used after.
 */
void keh_model_free(struct KehModel *model);

/**
 * Number of classes the model distinguishes; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
size_t keh_model_class_count(const struct KehModel *model);

/**
 * Mode of class `index` in model order.
 *
 * # Safety
 * `model` must be a live model handle and `out` a valid pointer.
 */
enum KehStatus keh_model_class_at(const struct KehModel *model, size_t index, enum KehMode *out);

/**
 * Length of the full feature vector accepted by [`keh_classify_features`].
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
size_t keh_model_feature_count(const struct KehModel *model);

/**
 * Sampling rate the model was trained at, in Hz.
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
double keh_model_sampling_rate_hz(const struct KehModel *model);

/**
 * Classifies one full (unselected) feature vector of
 * [`keh_model_feature_count`] values.
 *
 * # Safety
 * `values` must point to `len` doubles; `model` and `out` must be valid.
 */
enum KehStatus keh_classify_features(const struct KehModel *model,
                                     const double *values,
                                     size_t len,
                                     struct KehResult **out);

/**
 * Runs the full chain on raw voltage samples and votes over windows.
 *
 * # Safety
 * `samples` must point to `len` doubles; `model` and `out` must be valid.
 */
enum KehStatus keh_classify_trace(const struct KehModel *model,
                                  const double *samples,
                                  size_t len,
                                  double sampling_rate_hz,
                                  struct KehResult **out);

/**
 * Predicted mode of a result.
 *
 * # Safety
 * `result` must be a live result handle.
 */
enum KehMode keh_result_predicted(const struct KehResult *result);

/**
 * Whether any solve behind this result hit its iteration limit.
 *
 * # Safety
 * `result` must be a live result handle.
 */
bool keh_result_low_confidence(const struct KehResult *result);

/**
 * Number of windows that voted (1 for a feature vector).
 *
 * # Safety
 * `result` must be a live result handle.
 */
size_t keh_result_window_count(const struct KehResult *result);

/**
 * Copies per-class residuals (model class order) into `buf`. Fails with
 * `BufferTooSmall` if `cap` is below the class count.
 *
 * # Safety
 * `result` must be live and `buf` must hold `cap` doubles.
 */
enum KehStatus keh_result_residuals(const struct KehResult *result, double *buf, size_t cap);

/**
 * Copies per-class window votes (model class order) into `buf`.
 *
 * # Safety
 * `result` must be live and `buf` must hold `cap` values.
 */
enum KehStatus keh_result_votes(const struct KehResult *result, uint32_t *buf, size_t cap);

/**
 * Releases a result. NULL is ignored.
 *
 * # Safety
 * `result` must come from a classify call and not be used after.
 */
void keh_result_free(struct KehResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KEHMODE_H */
