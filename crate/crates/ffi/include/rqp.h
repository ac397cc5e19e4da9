#ifndef RQP_H
#define RQP_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  RQP_STATUS_OK = 0,
  RQP_STATUS_NULL_POINTER = 1,
  /**
   * Argument outside the function's domain, or an inconsistent configuration.
   */
  RQP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Fewer distinct informative samples than model parameters.
   */
  RQP_STATUS_UNDER_DETERMINED = 3,
  /**
   * Ill-conditioned or degenerate least-squares problem.
   */
  RQP_STATUS_DEGENERATE_FIT = 4,
  /**
   * The quadratic model never reaches the requested QP.
   */
  RQP_STATUS_NO_REAL_ROOT = 5,
  /**
   * Malformed file or document.
   */
  RQP_STATUS_PARSE = 6,
  RQP_STATUS_IO = 7,
  /**
   * Output buffer too small; the required length is still reported.
   */
  RQP_STATUS_BUFFER_TOO_SMALL = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  RQP_STATUS_INTERNAL = 9,
} RqpStatus;

typedef enum {
  RQP_MODEL_FORM_LINEAR = 0,
  RQP_MODEL_FORM_QUADRATIC = 1,
} RqpModelForm;

/**
 * Opaque fitted or user-supplied R-QP model.
 */
typedef struct RqpModel RqpModel;

/**
 * Opaque trained regressor loaded from a checkpoint.
 */
typedef struct RqpPredictor RqpPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next rqp call on the same thread.
 */
const char *rqp_last_error_message(void);

/**
 * QP = 6 log2(Q) + 4.
 *
 * # Safety
 * `out` must be valid for a write.
 */
RqpStatus rqp_qstep_to_qp(double qstep, double *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
RqpStatus rqp_qp_to_qstep(double qp, double *out);

/**
 * Entropy in bits of Cauchy(0, gamma) coefficients quantized with step
 * `qstep`. `truncation == 0` selects adaptive truncation; otherwise bins
 * `1..=truncation` on each side are summed.
 *
 * # Safety
 * `out` must be valid for a write.
 */
RqpStatus rqp_cauchy_entropy(double gamma,
                             double qstep,
                             bool include_zero_bin,
                             uint32_t truncation,
                             double *out);

/**
 * Least-squares fit over `n` (qp, rate) samples with increasing QP. `qp0`
 * and `r0` are ignored for free models.
 *
 * # Safety
 * `qps` and `rates` must point to `n` readable doubles; `out` must be valid
 * for a write. The returned handle must be released with `rqp_model_free`.
 */
RqpStatus rqp_model_fit(RqpModelForm form,
                        bool fastened,
                        double qp0,
                        double r0,
                        const double *qps,
                        const double *rates,
                        size_t n,
                        RqpModel **out);

/**
 * Model from known coefficients.
 *
 * # Safety
 * `coeffs` must point to `n` readable doubles; `out` must be valid for a
 * write. The returned handle must be released with `rqp_model_free`.
 */
RqpStatus rqp_model_new(RqpModelForm form,
                        bool fastened,
                        double qp0,
                        double r0,
                        const double *coeffs,
                        size_t n,
                        RqpModel **out);

/**
 * Copies the coefficients into `out` (capacity `cap`) and stores their
 * count in `len`. Returns `BufferTooSmall` if `cap < *len`.
 *
 * # Safety
 * `model` must be a live handle, `out` writable for `cap` doubles and `len`
 * valid for a write.
 */
RqpStatus rqp_model_coeffs(const RqpModel *model, double *out, size_t cap, size_t *len);

/**
 * Rate (bits) at which the model reaches `qp`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for a write.
 */
RqpStatus rqp_model_predict_rate(const RqpModel *model, double qp, double *out);

/**
 * QP the model assigns to `rate` bits.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for a write.
 */
RqpStatus rqp_model_qp(const RqpModel *model, double rate, double *out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void rqp_model_free(RqpModel *model);

/**
 * Signed relative error in percent, `(actual - predicted) / actual * 100`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
RqpStatus rqp_relative_error(double actual, double predicted, double *out);

/**
 * Loads a checkpoint written by `rqp train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for a write. The
 * returned handle must be released with `rqp_predictor_free`.
 */
RqpStatus rqp_predictor_load(const char *path, RqpPredictor **out);

/**
 * Predicts the model of one frame (PGM plus sidecar) and returns it as a new
 * model handle.
 *
 * # Safety
 * `predictor` must be a live handle, both paths NUL-terminated strings and
 * `out` valid for a write.
 */
RqpStatus rqp_predictor_model(const RqpPredictor *predictor,
                              const char *frame_path,
                              const char *sidecar_path,
                              RqpModel **out);

/**
 * # Safety
 * `predictor` must be null or a handle not yet freed.
 */
void rqp_predictor_free(RqpPredictor *predictor);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RQP_H */
