#ifndef RIS_EQUALIZER_H
#define RIS_EQUALIZER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RisStatus {
  RIS_STATUS_OK = 0,
  RIS_STATUS_NULL_POINTER = 1,
  RIS_STATUS_INVALID_ARGUMENT = 2,
  RIS_STATUS_DIMENSION = 3,
  RIS_STATUS_DEGENERATE = 4,
  RIS_STATUS_NUMERICAL = 5,
  RIS_STATUS_PANIC = 6,
} RisStatus;

/**
 * Opaque simulator handle.
 */
typedef struct RisSimulator RisSimulator;

/**
 * Scenario parameters; start from [`ris_params_default`].
 */
typedef struct RisParams {
  size_t elements;
  size_t delayed_paths;
  double kappa;
  double ue_x;
  double ue_y;
  bool noise;
  uint64_t seed;
  /**
   * ARISE target scale.
   */
  double alpha_s;
  size_t max_iters;
} RisParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *ris_last_error(void);

/**
 * # Safety
 * `out` must point to writable memory for one `RisParams`.
 */
enum RisStatus ris_params_default(struct RisParams *out);

/**
 * Builds a simulator and draws its first coherence block.
 *
 * # Safety
 * `params` must be valid for reads and `out` valid for one pointer write.
 */
enum RisStatus ris_simulator_new(const struct RisParams *params, struct RisSimulator **out);

/**
 * # Safety
 * `sim` must come from [`ris_simulator_new`] and not be used afterwards.
 * Null is ignored.
 */
void ris_simulator_free(struct RisSimulator *sim);

/**
 * Number of RIS elements and pulse taps `L + 1`.
 *
 * # Safety
 * `sim` must be a live handle; the outputs must be writable.
 */
enum RisStatus ris_simulator_dims(const struct RisSimulator *sim, size_t *elements, size_t *taps);

/**
 * Receiver noise power in watts (zero when noise is off).
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum RisStatus ris_simulator_noise_power(const struct RisSimulator *sim, double *out);

/**
 * Moves the UE one random-walk step and draws a new coherence block.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum RisStatus ris_simulator_next_block(struct RisSimulator *sim);

/**
 * Pulse response under `gamma` (`elements` coefficients). With `noisy`
 * false the noiseless response is returned.
 *
 * # Safety
 * `gamma` must hold `2 * elements` doubles and `out` `2 * out_taps`.
 */
enum RisStatus ris_simulator_pulse(struct RisSimulator *sim,
                                   const double *gamma,
                                   size_t elements,
                                   bool noisy,
                                   double *out,
                                   size_t out_taps);

/**
 * Runs ARISE on the current block, starting from random phases, and
 * writes the final configuration. `iterations` may be null.
 *
 * # Safety
 * `out` must hold `2 * elements` doubles.
 */
enum RisStatus ris_simulator_arise(struct RisSimulator *sim,
                                   double *out,
                                   size_t elements,
                                   size_t *iterations);

/**
 * Conjugate-phase configuration aligning the main cascaded taps.
 *
 * # Safety
 * `out` must hold `2 * elements` doubles.
 */
enum RisStatus ris_simulator_baseline_inverse(const struct RisSimulator *sim,
                                              double *out,
                                              size_t elements);

/**
 * Signed main-tap power minus ISI power of a pulse.
 *
 * # Safety
 * `y` must hold `2 * taps` doubles; `out` must be writable.
 */
enum RisStatus ris_eta(const double *y, size_t taps, double *out);

/**
 * [`ris_eta`] divided by the pulse energy, in `[-1, 1]`.
 *
 * # Safety
 * As [`ris_eta`].
 */
enum RisStatus ris_eta_norm(const double *y, size_t taps, double *out);

/**
 * Main-tap power over ISI plus `noise_power`, in dB.
 *
 * # Safety
 * As [`ris_eta`].
 */
enum RisStatus ris_sinr_db(const double *y, size_t taps, double noise_power, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIS_EQUALIZER_H */
