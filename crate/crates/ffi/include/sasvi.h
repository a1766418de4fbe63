#ifndef SASVI_H
#define SASVI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SASVI_METHOD_SASVI = 0,
  SASVI_METHOD_T1 = 1,
  SASVI_METHOD_GROUND_TRUTH = 2,
  SASVI_METHOD_FRAMEWISE = 3,
} SasviMethod;

typedef enum {
  SASVI_STATUS_OK = 0,
  SASVI_STATUS_NULL_POINTER = 1,
  SASVI_STATUS_INVALID_ARGUMENT = 2,
  SASVI_STATUS_DIMENSION_MISMATCH = 3,
  SASVI_STATUS_BUFFER_TOO_SMALL = 4,
  SASVI_STATUS_MODEL_ERROR = 5,
  SASVI_STATUS_IO_ERROR = 6,
  SASVI_STATUS_PANIC = 7,
} SasviStatus;

/**
 * Masks and events of a finished run.
 */
typedef struct SasviRun SasviRun;

/**
 * A loaded scenario.
 */
typedef struct SasviScenario SasviScenario;

/**
 * Run settings. `stride` applies to the ground-truth method only.
 */
typedef struct {
  SasviMethod method;
  size_t n_t;
  size_t n_a;
  uint64_t seed;
  bool handle_leave;
  size_t stride;
  double drop_prob;
  double class_flip_prob;
  double spurious_prob;
  uint64_t noise_seed;
} SasviRunOptions;

/**
 * Per-metric means, in the CSV column order; `valid[i]` is false when the
 * metric is undefined for the run.
 */
typedef struct {
  double values[8];
  bool valid[8];
} SasviMeans;

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sasvi_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *sasvi_version(void);

/**
 * Defaults: SASVi with `n_t = 4`, `n_a = 3`, leave handling on and a
 * noise-free overseer.
 */
SasviRunOptions sasvi_run_options_default(void);

/**
 * Parses a scenario from nul-terminated JSON.
 *
 * # Safety
 * `json` must be a valid C string and `out` a writable pointer.
 */
SasviStatus sasvi_scenario_from_json(const char *json, SasviScenario **out);

/**
 * # Safety
 * `scenario` must come from [`sasvi_scenario_from_json`] and not be used afterwards.
 */
void sasvi_scenario_free(SasviScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle; the out pointers must be writable.
 */
SasviStatus sasvi_scenario_info(const SasviScenario *scenario,
                                size_t *width,
                                size_t *height,
                                size_t *num_frames,
                                size_t *num_classes);

/**
 * Renders frame `t`: `3·w·h` RGB bytes into `rgb` and `w·h` class ids into
 * `labels`. Either output may be null to skip it.
 *
 * # Safety
 * Non-null buffers must hold at least the stated lengths.
 */
SasviStatus sasvi_scenario_render(const SasviScenario *scenario,
                                  size_t t,
                                  uint8_t *rgb,
                                  size_t rgb_len,
                                  uint8_t *labels,
                                  size_t labels_len);

/**
 * Runs a method on the scenario with the oracle overseer (noise as given)
 * and the surrogate tracker.
 *
 * # Safety
 * `scenario` and `options` must be valid; `out` must be writable.
 */
SasviStatus sasvi_run(const SasviScenario *scenario,
                      const SasviRunOptions *options,
                      SasviRun **out);

/**
 * # Safety
 * `run` must come from [`sasvi_run`] and not be used afterwards.
 */
void sasvi_run_free(SasviRun *run);

/**
 * # Safety
 * `run` must be a live handle; the out pointers must be writable.
 */
SasviStatus sasvi_run_counts(const SasviRun *run, size_t *num_frames, size_t *num_events);

/**
 * Copies the class ids of output frame `t` into `labels`.
 *
 * # Safety
 * `labels` must hold at least `labels_len` bytes.
 */
SasviStatus sasvi_run_mask(const SasviRun *run, size_t t, uint8_t *labels, size_t labels_len);

/**
 * Trigger and re-prompt frame of event `index`.
 *
 * # Safety
 * `run` must be a live handle; the out pointers must be writable.
 */
SasviStatus sasvi_run_event(const SasviRun *run, size_t index, size_t *trigger, size_t *reprompt);

/**
 * Scores a run against the scenario's ground truth with exact flow.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
SasviStatus sasvi_run_evaluate(const SasviRun *run, const SasviScenario *scenario, SasviMeans *out);

/**
 * Name of metric column `index` (0..8) as a static string, or null.
 */
const char *sasvi_metric_name(size_t index);

/**
 * Dice and IoU of two `width·height` byte masks (nonzero = set).
 *
 * # Safety
 * `a` and `b` must each point to `width·height` readable bytes.
 */
SasviStatus sasvi_overlap(const uint8_t *a,
                          const uint8_t *b,
                          size_t width,
                          size_t height,
                          double *dice,
                          double *iou);

#endif  /* SASVI_H */
