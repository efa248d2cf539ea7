#ifndef CANYON_H
#define CANYON_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CanyonCutoffKind {
  /**
   * SNR drops below the threshold; the distance is valid.
   */
  CANYON_CUTOFF_KIND_AT = 0,
  /**
   * SNR stays above the threshold over the whole profile.
   */
  CANYON_CUTOFF_KIND_NOT_REACHED = 1,
  /**
   * SNR never reaches the threshold.
   */
  CANYON_CUTOFF_KIND_NEVER_ABOVE = 2,
} CanyonCutoffKind;

/**
 * Result of every fallible call.
 */
typedef enum CanyonStatus {
  CANYON_STATUS_OK = 0,
  CANYON_STATUS_NULL_POINTER = 1,
  CANYON_STATUS_INVALID_ARGUMENT = 2,
  CANYON_STATUS_PARSE = 3,
  CANYON_STATUS_SCHEMA = 4,
  CANYON_STATUS_IO = 5,
  CANYON_STATUS_DEGENERATE = 6,
  CANYON_STATUS_PANIC = 7,
} CanyonStatus;

/**
 * Parsed measurement file.
 */
typedef struct CanyonDataset CanyonDataset;

/**
 * Spectrum consumption model.
 */
typedef struct CanyonScm CanyonScm;

/**
 * Single-slope fit `pg(d) = intercept_b + 10 * slope_n * log10(d)`.
 */
typedef struct CanyonFit {
  double slope_n;
  double intercept_b;
  double rms_sigma;
  double d_min;
  double d_max;
  size_t count;
} CanyonFit;

typedef struct CanyonBudget {
  double tx_power_dbm;
  double tx_max_gain_dbi;
  double rx_gain_dbi;
  double noise_figure_db;
  double bandwidth_hz;
  double snr_cutoff_db;
  double median_abg_dbi;
  double nominal_azimuth_gain_dbi;
} CanyonBudget;

typedef struct CanyonCoverage {
  double min_snr_db;
  double max_snr_db;
  enum CanyonCutoffKind cutoff_kind;
  /**
   * NaN unless `cutoff_kind` is `At`.
   */
  double cutoff_m;
  enum CanyonCutoffKind nominal_cutoff_kind;
  double nominal_cutoff_m;
  double mean_rate_bps;
} CanyonCoverage;

typedef struct CanyonCompat {
  /**
   * `+inf` when no interferer reaches the receiver.
   */
  double margin_db;
  /**
   * NaN when no interferer reaches the receiver.
   */
  double worst_freq_hz;
  bool compatible;
} CanyonCompat;

typedef struct CanyonSimulation {
  size_t n_links;
  size_t n_trials;
  uint32_t mode;
  uint32_t max_channels;
  double fraction_two_or_three;
  bool all_valid;
  double max_link_seconds;
  double mean_link_seconds;
} CanyonSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *canyon_version(void);

/**
 * Copy of the last error message on this thread, or null if the last call
 * succeeded. Free with `canyon_string_free`.
 */
char *canyon_last_error_message(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void canyon_string_free(char *s);

/**
 * Read a measurement file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CanyonStatus canyon_dataset_open(const char *path, struct CanyonDataset **out);

/**
 * Parse measurement text held in memory.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CanyonStatus canyon_dataset_parse(const char *text, struct CanyonDataset **out);

/**
 * # Safety
 * `ds` must come from `canyon_dataset_open`/`_parse` or be null.
 */
void canyon_dataset_free(struct CanyonDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_dataset_link_count(const struct CanyonDataset *ds, size_t *out);

/**
 * Sidewalk id of the dataset. Free the result with `canyon_string_free`.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_dataset_sidewalk_id(const struct CanyonDataset *ds, char **out);

/**
 * Compute per-link path gain and fit the single-slope model.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_dataset_fit(const struct CanyonDataset *ds,
                                     double bin_width_deg,
                                     struct CanyonFit *out);

/**
 * Fit `len` (distance, path gain) pairs.
 *
 * # Safety
 * `distances_m` and `path_gains_db` must each hold `len` values.
 */
enum CanyonStatus canyon_fit_points(const double *distances_m,
                                    const double *path_gains_db,
                                    size_t len,
                                    struct CanyonFit *out);

/**
 * Default 28 GHz link budget.
 */
struct CanyonBudget canyon_budget_default(void);

/**
 * Receiver noise floor in dBm.
 *
 * # Safety
 * `budget` must be readable and `out` writable.
 */
enum CanyonStatus canyon_noise_floor(const struct CanyonBudget *budget, double *out);

/**
 * SNR profile summary and cutoff distances on `start..=end` by `step` meters.
 *
 * # Safety
 * `fit` and `budget` must be readable and `out` writable.
 */
enum CanyonStatus canyon_coverage(const struct CanyonFit *fit,
                                  const struct CanyonBudget *budget,
                                  double start_m,
                                  double end_m,
                                  double step_m,
                                  struct CanyonCoverage *out);

/**
 * Read an SCM JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CanyonStatus canyon_scm_open(const char *path, struct CanyonScm **out);

/**
 * Parse SCM JSON from `len` bytes.
 *
 * # Safety
 * `bytes` must hold `len` readable bytes; `out` must be writable.
 */
enum CanyonStatus canyon_scm_parse(const uint8_t *bytes, size_t len, struct CanyonScm **out);

/**
 * # Safety
 * `scm` must come from `canyon_scm_open`/`_parse` or be null.
 */
void canyon_scm_free(struct CanyonScm *scm);

/**
 * Canonical JSON of the model. Free the result with `canyon_string_free`.
 *
 * # Safety
 * `scm` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_scm_serialize(const struct CanyonScm *scm, char **out);

/**
 * # Safety
 * `scm` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_scm_is_receiver(const struct CanyonScm *scm, bool *out);

/**
 * Aggregate margin of receiver `rx` against `n_tx` transmitters.
 *
 * # Safety
 * `txs` must hold `n_tx` live handles (it may be null when `n_tx` is 0);
 * `rx` must be a live handle and `out` writable.
 */
enum CanyonStatus canyon_compat(const struct CanyonScm *const *txs,
                                size_t n_tx,
                                const struct CanyonScm *rx,
                                struct CanyonCompat *out);

/**
 * Monte Carlo channel deconfliction with the default scenario parameters.
 * When `channels_out` is non-null it receives the channel count of each of
 * the `n_trials` trials.
 *
 * # Safety
 * `channels_out` must be null or hold `n_trials` writable values; `out` must
 * be writable.
 */
enum CanyonStatus canyon_simulate(size_t n_links,
                                  size_t n_trials,
                                  uint64_t seed,
                                  double area_sq_mi,
                                  double channel_bw_hz,
                                  uint32_t *channels_out,
                                  struct CanyonSimulation *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CANYON_H */
