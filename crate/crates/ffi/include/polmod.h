/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef POLMOD_H
#define POLMOD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PolmodStatus {
  POLMOD_STATUS_OK = 0,
  POLMOD_STATUS_NULL_POINTER = 1,
  POLMOD_STATUS_INVALID_ARGUMENT = 2,
  POLMOD_STATUS_DOMAIN_ERROR = 3,
  /**
   * The reverse half-wave voltage is unbounded at this frequency.
   */
  POLMOD_STATUS_DIVERGENT = 4,
  POLMOD_STATUS_COMPUTATION_ERROR = 5,
  POLMOD_STATUS_PANIC = 6,
} PolmodStatus;

typedef enum PolmodDriveKind {
  POLMOD_DRIVE_KIND_SINE = 0,
  POLMOD_DRIVE_KIND_SQUARE = 1,
} PolmodDriveKind;

typedef enum PolmodPulseProfile {
  POLMOD_PULSE_PROFILE_GAUSSIAN = 0,
  POLMOD_PULSE_PROFILE_SECH2 = 1,
} PolmodPulseProfile;

/**
 * Opaque encoder handle.
 */
typedef struct PolmodEncoder PolmodEncoder;

/**
 * Opaque key-rate model handle.
 */
typedef struct PolmodRateModel PolmodRateModel;

typedef struct PolmodCounts {
  uint64_t c_a;
  uint64_t d_a;
  uint64_t c_b_perp;
  uint64_t d_b_perp;
} PolmodCounts;

typedef struct PolmodModulatorParams {
  double v_pi_f;
  double tau_d;
  double length_l;
  double n0;
} PolmodModulatorParams;

/**
 * Flat encoder description. `pulse_fwhm_s == 0` selects a zero-width pulse.
 */
typedef struct PolmodEncoderParams {
  struct PolmodModulatorParams modulator;
  enum PolmodDriveKind drive_kind;
  double drive_frequency_hz;
  double drive_phase_offset_rad;
  double drive_delay_s;
  double square_duration_s;
  double pulse_fwhm_s;
  double pulse_rep_rate_hz;
  enum PolmodPulseProfile pulse_profile;
  double baseline_per_db;
  double rf_transfer_efficiency;
  bool include_reverse_residual;
} PolmodEncoderParams;

typedef struct PolmodPerPoint {
  double per_db;
  double qber;
} PolmodPerPoint;

typedef struct PolmodProtocolParams {
  double p_d;
  double p_s;
  double p_z;
  double n_z;
  double u_d;
  double u_s;
  double u_v;
  double e_d;
  double f_ec;
  double eps_sec;
  double eps_cor;
  double alpha_db_per_km;
} PolmodProtocolParams;

typedef struct PolmodDetectorModel {
  double efficiency;
  double dark_count_prob;
} PolmodDetectorModel;

typedef struct PolmodRatePoint {
  double distance_km;
  double transmittance;
  double q_s;
  double e_s;
  double q_d;
  double e_d_obs;
  double y1_lower;
  double e1_upper;
  double skr_bps;
} PolmodRatePoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *polmod_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * excluding the terminator; `buf` may be null to query the length.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t polmod_last_error_message(char *buf, size_t len);

/**
 * `10·log10((1−e)/e)`.
 *
 * # Safety
 * `out_db` must be null or valid for writes.
 */
enum PolmodStatus polmod_per_from_error(double e, double *out_db);

/**
 * Inverse of [`polmod_per_from_error`].
 *
 * # Safety
 * `out_e` must be null or valid for writes.
 */
enum PolmodStatus polmod_error_from_per(double per_db, double *out_e);

/**
 * Intrinsic QBER from dark-count-corrected counts.
 *
 * # Safety
 * `out_iqber` must be null or valid for writes.
 */
enum PolmodStatus polmod_iqber(struct PolmodCounts counts, double *out_iqber);

/**
 * # Safety
 * `out_h` must be null or valid for writes.
 */
enum PolmodStatus polmod_binary_entropy(double x, double *out_h);

/**
 * # Safety
 * `out_params` must be null or valid for writes.
 */
enum PolmodStatus polmod_modulator_default(struct PolmodModulatorParams *out_params);

/**
 * Reverse half-wave voltage at `frequency_hz`. Returns
 * `POLMOD_STATUS_DIVERGENT` (leaving `out_v` untouched) when the response
 * is unbounded.
 *
 * # Safety
 * `params` must be null or valid for reads, `out_v` null or valid for writes.
 */
enum PolmodStatus polmod_v_pi_reverse(double frequency_hz,
                                      const struct PolmodModulatorParams *params,
                                      double *out_v);

/**
 * Repetition-rate bound of a square-driven Sagnac encoder.
 *
 * # Safety
 * `out_hz` must be null or valid for writes.
 */
enum PolmodStatus polmod_f_max_previous_scheme(double t0,
                                               double te,
                                               double l,
                                               double n0,
                                               double *out_hz);

/**
 * Fills `out_params` with the default 10 GHz sine / 2.16 ps configuration.
 *
 * # Safety
 * `out_params` must be null or valid for writes.
 */
enum PolmodStatus polmod_encoder_params_default(struct PolmodEncoderParams *out_params);

/**
 * # Safety
 * `params` must be null or valid for reads; `out_handle` null or valid for
 * writes. The handle must be released with [`polmod_encoder_free`].
 */
enum PolmodStatus polmod_encoder_new(const struct PolmodEncoderParams *params,
                                     struct PolmodEncoder **out_handle);

/**
 * # Safety
 * `handle` must be null or a pointer from [`polmod_encoder_new`] not yet freed.
 */
void polmod_encoder_free(struct PolmodEncoder *handle);

/**
 * Replaces the pulse width so that the duty cycle against the drive equals
 * `duty` (0 gives a zero-width pulse).
 *
 * # Safety
 * `handle` must be null or a live encoder handle not used concurrently.
 */
enum PolmodStatus polmod_encoder_set_duty(struct PolmodEncoder *handle, double duty);

/**
 * PER and QBER of the state prepared for `target_phase_rad` with the pulse
 * displaced by `delay_s` from the drive peak.
 *
 * # Safety
 * `handle` must be null or a live encoder handle; `out_point` null or
 * valid for writes.
 */
enum PolmodStatus polmod_encoder_per(const struct PolmodEncoder *handle,
                                     double target_phase_rad,
                                     double delay_s,
                                     struct PolmodPerPoint *out_point);

/**
 * # Safety
 * As [`polmod_encoder_per`].
 */
enum PolmodStatus polmod_encoder_equivalent_v_pi(const struct PolmodEncoder *handle, double *out_v);

/**
 * Worst-case counter-propagating phase for a drive of amplitude
 * `amplitude_v`.
 *
 * # Safety
 * As [`polmod_encoder_per`].
 */
enum PolmodStatus polmod_encoder_reverse_residual(const struct PolmodEncoder *handle,
                                                  double amplitude_v,
                                                  double *out_rad);

/**
 * Default protocol and detector parameters. With `table1_literal` the
 * weakest intensity is 0.35 instead of 0.
 *
 * # Safety
 * Each pointer must be null or valid for writes; null pointers are skipped.
 */
enum PolmodStatus polmod_rate_defaults(bool table1_literal,
                                       struct PolmodProtocolParams *out_protocol,
                                       struct PolmodDetectorModel *out_detector);

/**
 * # Safety
 * `protocol` and `detector` must be null or valid for reads; `out_handle`
 * null or valid for writes. Release with [`polmod_rate_model_free`].
 */
enum PolmodStatus polmod_rate_model_new(const struct PolmodProtocolParams *protocol,
                                        const struct PolmodDetectorModel *detector,
                                        struct PolmodRateModel **out_handle);

/**
 * # Safety
 * `handle` must be null or a pointer from [`polmod_rate_model_new`] not yet freed.
 */
void polmod_rate_model_free(struct PolmodRateModel *handle);

/**
 * Key rate at one distance and clock rate.
 *
 * # Safety
 * `handle` must be null or a live rate-model handle; `out_point` null or
 * valid for writes.
 */
enum PolmodStatus polmod_rate_model_point(const struct PolmodRateModel *handle,
                                          double distance_km,
                                          double rep_rate_hz,
                                          struct PolmodRatePoint *out_point);

/**
 * Key-rate curve over `n` distances, written to `out_points[0..n]`.
 *
 * # Safety
 * `distances_km` must be valid for `n` reads and `out_points` for `n`
 * writes (either may be null only when `n == 0`).
 */
enum PolmodStatus polmod_rate_model_curve(const struct PolmodRateModel *handle,
                                          const double *distances_km,
                                          size_t n,
                                          double rep_rate_hz,
                                          struct PolmodRatePoint *out_points);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLMOD_H */
