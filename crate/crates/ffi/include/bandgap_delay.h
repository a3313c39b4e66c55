#ifndef BANDGAP_DELAY_H
#define BANDGAP_DELAY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BdStatus {
  BD_STATUS_OK = 0,
  BD_STATUS_NULL_POINTER = 1,
  /**
   * Input rejected before computation.
   */
  BD_STATUS_VALIDATION = 2,
  /**
   * Opaque point, unconverged derivative, no gap, unbracketed dip.
   */
  BD_STATUS_NUMERICAL = 3,
  BD_STATUS_IO = 4,
  BD_STATUS_PARSE = 5,
  BD_STATUS_PANIC = 6,
} BdStatus;

typedef enum BdPolarization {
  BD_POLARIZATION_P = 0,
  BD_POLARIZATION_S = 1,
} BdPolarization;

typedef enum BdSpectralShape {
  BD_SPECTRAL_SHAPE_GAUSSIAN = 0,
  BD_SPECTRAL_SHAPE_SINC2 = 1,
} BdSpectralShape;

/**
 * Opaque layer stack.
 */
typedef struct BdStack BdStack;

typedef struct BdScattering {
  double t_re;
  double t_im;
  double r_re;
  double r_im;
  /**
   * Unwrapped transmission phase, rad.
   */
  double phi_t;
  double transmittance;
  double reflectance;
} BdScattering;

/**
 * All times in fs, lengths in nm.
 */
typedef struct BdDelayReport {
  double transmittance;
  double group_delay;
  double transverse_shift;
  double larmor_out_of_plane;
  double larmor_time;
  /**
   * NaN outside the Bloch gap.
   */
  double semiclassical_time;
  double air_time;
  double relative_group_delay;
  double relative_larmor_time;
  /**
   * False when a numerical derivative failed its cross-check.
   */
  bool derivatives_converged;
  bool in_gap;
} BdDelayReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Quarter-wave stack in air with layers alternating from `first_high`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum BdStatus bd_stack_quarter_wave(double design_wavelength_nm,
                                    double n_high,
                                    double n_low,
                                    uint32_t layer_count,
                                    bool first_high,
                                    struct BdStack **out);

/**
 * Stack from a JSON description (explicit layers or quarter-wave shorthand).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum BdStatus bd_stack_from_json(const char *json, struct BdStack **out);

/**
 * Releases a stack. Null is ignored.
 *
 * # Safety
 * `stack` must come from a constructor and not be used afterwards.
 */
void bd_stack_free(struct BdStack *stack);

/**
 * Number of layers, or 0 for a null handle.
 *
 * # Safety
 * `stack` must be null or a live handle.
 */
size_t bd_stack_layer_count(const struct BdStack *stack);

/**
 * Total physical thickness, nm; NaN for a null handle.
 *
 * # Safety
 * `stack` must be null or a live handle.
 */
double bd_stack_total_thickness(const struct BdStack *stack);

/**
 * Transmission and reflection amplitudes at one operating point.
 *
 * # Safety
 * `stack` must be a live handle; `out` must be valid for writes.
 */
enum BdStatus bd_scattering(const struct BdStack *stack,
                            double wavelength_nm,
                            double angle_rad,
                            enum BdPolarization pol,
                            struct BdScattering *out);

/**
 * Group, Larmor and semiclassical delays at one operating point.
 *
 * # Safety
 * `stack` must be a live handle; `out` must be valid for writes.
 */
enum BdStatus bd_delay_report(const struct BdStack *stack,
                              double wavelength_nm,
                              double angle_rad,
                              enum BdPolarization pol,
                              struct BdDelayReport *out);

/**
 * Centre of the two-photon coincidence dip, fs, for the stack in one arm
 * against an equal length of air in the other.
 *
 * # Safety
 * `stack` must be a live handle; `out_center_fs` must be valid for writes.
 */
enum BdStatus bd_hom_dip_center(const struct BdStack *stack,
                                double wavelength_nm,
                                double angle_rad,
                                enum BdPolarization pol,
                                double correlation_time_fs,
                                enum BdSpectralShape shape,
                                double *out_center_fs);

/**
 * Copy of the calling thread's last error message, or null if the last
 * call succeeded. Free with `bd_string_free`.
 */
char *bd_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from `bd_last_error_message` and not be freed twice.
 */
void bd_string_free(char *s);

/**
 * Library version, static NUL-terminated string.
 */
const char *bd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BANDGAP_DELAY_H */
