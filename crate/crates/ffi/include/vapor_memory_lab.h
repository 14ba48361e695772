#ifndef VAPOR_MEMORY_LAB_H
#define VAPOR_MEMORY_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call.
 */
typedef enum VmlStatus {
  VML_STATUS_OK = 0,
  VML_STATUS_NULL_POINTER = 1,
  VML_STATUS_INVALID_ARGUMENT = 2,
  VML_STATUS_CONFIG = 3,
  VML_STATUS_NUMERIC = 4,
  VML_STATUS_NON_CONVERGENCE = 5,
  VML_STATUS_IO = 6,
  VML_STATUS_PANIC = 7,
} VmlStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct VmlConfig VmlConfig;

/**
 * Opaque transmission spectrum.
 */
typedef struct VmlSpectrum VmlSpectrum;

/**
 * Slow-light figures at two-photon resonance.
 */
typedef struct VmlSlowLight {
  double group_velocity_m_s;
  double compression_factor;
  double compressed_length_m;
  double captured_fraction;
} VmlSlowLight;

/**
 * Efficiency and timing extracted from one synthetic histogram.
 */
typedef struct VmlEfficiency {
  double eta;
  double eta_uncertainty;
  double storage_time_s;
  double fractional_delay;
  double n_read;
  double n_leak;
  /**
   * Non-zero when the retrieved peak was not resolved.
   */
  int low_confidence;
} VmlEfficiency;

/**
 * Damped-precession lifetime fit.
 */
typedef struct VmlLifetimeFit {
  double t_mem_s;
  /**
   * Expanded uncertainty of `t_mem_s`.
   */
  double t_mem_uncertainty_s;
  double omega_rad_s;
  double phi_rad;
  double eta0;
  int converged;
} VmlLifetimeFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *vml_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vml_version(void);

/**
 * Configuration with every default.
 *
 * # Safety
 * `out` must be writable.
 */
enum VmlStatus vml_config_default(struct VmlConfig **out);

/**
 * Parse and validate a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum VmlStatus vml_config_from_toml(const char *toml, struct VmlConfig **out);

/**
 * # Safety
 * `cfg` must come from a `vml_config_*` constructor and not be used again.
 */
void vml_config_free(struct VmlConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum VmlStatus vml_config_set_seed(struct VmlConfig *cfg, uint64_t seed);

/**
 * Hex SHA-256 of the resolved configuration (64 characters plus NUL, so
 * `buf_len` must be at least 65).
 *
 * # Safety
 * `cfg` must be a live handle and `buf` writable for `buf_len` bytes.
 */
enum VmlStatus vml_config_hash(const struct VmlConfig *cfg, char *buf, size_t buf_len);

/**
 * Transmission spectrum over the configured grid at `power_w` (W).
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum VmlStatus vml_spectrum_compute(const struct VmlConfig *cfg,
                                    double power_w,
                                    struct VmlSpectrum **out);

/**
 * Number of grid points, or 0 for a null handle.
 *
 * # Safety
 * `spec` must be null or a live handle.
 */
size_t vml_spectrum_len(const struct VmlSpectrum *spec);

/**
 * Copy detunings (Hz) and transmissions into caller arrays of length `len`,
 * which must equal [`vml_spectrum_len`].
 *
 * # Safety
 * `spec` must be a live handle; both arrays writable for `len` doubles.
 */
enum VmlStatus vml_spectrum_copy(const struct VmlSpectrum *spec,
                                 double *detuning_hz,
                                 double *transmission,
                                 size_t len);

/**
 * # Safety
 * `spec` must come from [`vml_spectrum_compute`] and not be used again.
 */
void vml_spectrum_free(struct VmlSpectrum *spec);

/**
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum VmlStatus vml_slowlight(const struct VmlConfig *cfg,
                             double power_w,
                             double pulse_width_s,
                             struct VmlSlowLight *out);

/**
 * One storage run at `set_storage_s` with the configured sequence.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum VmlStatus vml_storage_run(const struct VmlConfig *cfg,
                               double set_storage_s,
                               uint64_t seed,
                               struct VmlEfficiency *out);

/**
 * Fit `eta(t)` with per-point uncertainties `sigma`, all of length `n`.
 *
 * # Safety
 * The three arrays must be readable for `n` doubles and `out` writable.
 */
enum VmlStatus vml_lifetime_fit(const double *t_s,
                                const double *eta,
                                const double *sigma,
                                size_t n,
                                struct VmlLifetimeFit *out);

/**
 * Larmor precession frequency (Hz) in a field of `b_tesla`.
 *
 * # Safety
 * `out_hz` must be writable.
 */
enum VmlStatus vml_larmor_frequency_hz(double b_tesla, double *out_hz);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VAPOR_MEMORY_LAB_H */
