#ifndef CEPSONAR_H
#define CEPSONAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CepsonarStatus {
  CEPSONAR_STATUS_OK = 0,
  CEPSONAR_STATUS_NULL_POINTER = 1,
  CEPSONAR_STATUS_INVALID_ARGUMENT = 2,
  CEPSONAR_STATUS_SHAPE_MISMATCH = 3,
  CEPSONAR_STATUS_SIGNAL_TOO_SHORT = 4,
  CEPSONAR_STATUS_OUT_OF_GEOMETRY = 5,
  CEPSONAR_STATUS_NON_FINITE = 6,
  CEPSONAR_STATUS_FORMAT = 7,
  CEPSONAR_STATUS_IO = 8,
  CEPSONAR_STATUS_PANIC = 9,
  CEPSONAR_STATUS_OTHER = 10,
} CepsonarStatus;

/**
 * Turns audio segments into cepstrogram features with the ranging lifter.
 */
typedef struct CepsonarFeaturizer CepsonarFeaturizer;

/**
 * A trained network together with its feature normalization.
 */
typedef struct CepsonarModel CepsonarModel;

/**
 * One network output.
 */
typedef struct CepsonarPrediction {
  double presence_probability;
  /**
   * Metres.
   */
  double range;
} CepsonarPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null when no
 * call has failed. The pointer stays valid until the next failing call.
 */
const char *cepsonar_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cepsonar_version(void);

/**
 * Loads a checkpoint written by `cepsonar train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CepsonarStatus cepsonar_model_load(const char *path, struct CepsonarModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`cepsonar_model_load`] and not be used afterwards.
 */
void cepsonar_model_free(struct CepsonarModel *model);

/**
 * Feature height `m` and width `n` the model expects.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CepsonarStatus cepsonar_model_input_shape(const struct CepsonarModel *model,
                                               size_t *m,
                                               size_t *n);

/**
 * Predicts `count` raw (unnormalized) features laid out back to back,
 * each `m * n` values row-major, writing `count` predictions to `out`.
 *
 * # Safety
 * `features` must hold `count * m * n` doubles and `out` room for `count`
 * predictions.
 */
enum CepsonarStatus cepsonar_model_predict(const struct CepsonarModel *model,
                                           const double *features,
                                           size_t count,
                                           struct CepsonarPrediction *out);

/**
 * Creates a featurizer producing `m x n` features, where `m` follows from
 * the 84 us to 1.4 ms lifter at `sample_rate`. Spectra use Hann windows of
 * `window_length` samples with 50% overlap.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CepsonarStatus cepsonar_featurizer_new(double sample_rate,
                                            size_t window_length,
                                            size_t n,
                                            struct CepsonarFeaturizer **out);

/**
 * Releases a featurizer. Null is ignored.
 *
 * # Safety
 * `f` must come from [`cepsonar_featurizer_new`] and not be used afterwards.
 */
void cepsonar_featurizer_free(struct CepsonarFeaturizer *f);

/**
 * Feature height `m` and width `n`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CepsonarStatus cepsonar_featurizer_shape(const struct CepsonarFeaturizer *f,
                                              size_t *m,
                                              size_t *n);

/**
 * Featurizes `len` samples into `out`, which must hold exactly
 * `out_len == m * n` doubles (row-major).
 *
 * # Safety
 * `samples` must hold `len` doubles and `out` `out_len` doubles.
 */
enum CepsonarStatus cepsonar_featurizer_compute(const struct CepsonarFeaturizer *f,
                                                const double *samples,
                                                size_t len,
                                                double *out,
                                                size_t out_len);

/**
 * Horizontal range (m) at which the surface-minus-direct delay equals
 * `tdoa` seconds.
 *
 * # Safety
 * `range` must be a valid pointer.
 */
enum CepsonarStatus cepsonar_tdoa_to_range(double tdoa,
                                           double source_depth,
                                           double receiver_depth,
                                           double sound_speed,
                                           double *range);

/**
 * Surface-minus-direct delay (s) at horizontal range `range` metres.
 *
 * # Safety
 * `tdoa` must be a valid pointer.
 */
enum CepsonarStatus cepsonar_range_to_tdoa(double range,
                                           double source_depth,
                                           double receiver_depth,
                                           double sound_speed,
                                           double *tdoa);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CEPSONAR_H */
