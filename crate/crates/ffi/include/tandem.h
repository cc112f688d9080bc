/* tandem C ABI. Regenerated by the crate build script; do not edit. */

#ifndef TANDEM_H
#define TANDEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Role of an AOI box; decides which label side a gaze hit counts for.
 */
enum TandemAoiRole
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  TANDEM_AOI_ROLE_HUMAN_WORKSPACE = 0,
  TANDEM_AOI_ROLE_ROBOT_AREA = 1,
  TANDEM_AOI_ROLE_PARTS_TABLE = 2,
};
#ifndef __cplusplus
typedef int32_t TandemAoiRole;
#endif // __cplusplus

/**
 * Binary intent label produced by both classifiers.
 */
enum TandemLabel
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  TANDEM_LABEL_WORKING = 0,
  TANDEM_LABEL_IDLE = 1,
};
#ifndef __cplusplus
typedef int32_t TandemLabel;
#endif // __cplusplus

/**
 * Result of every fallible call.
 */
enum TandemStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  TANDEM_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  TANDEM_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument failed validation (range, geometry, encoding).
   */
  TANDEM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The operating system reported an I/O failure.
   */
  TANDEM_STATUS_IO = 3,
  /**
   * A file was readable but not in the expected format.
   */
  TANDEM_STATUS_PARSE = 4,
  /**
   * A streaming call broke the timeline contract (out-of-order or
   * gapped timestamps).
   */
  TANDEM_STATUS_STREAM = 5,
  /**
   * An internal invariant failed; the handle should be freed.
   */
  TANDEM_STATUS_PANIC = 6,
};
#ifndef __cplusplus
typedef int32_t TandemStatus;
#endif // __cplusplus

/**
 * An ordered collection of named AOI boxes.
 */
typedef struct TandemAoiSet TandemAoiSet;

/**
 * Streaming gaze classifier with dwell hysteresis.
 */
typedef struct TandemGaze TandemGaze;

/**
 * Streaming IMU window classifier.
 */
typedef struct TandemImu TandemImu;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tandem_version(void);

/**
 * Message of this thread's most recent failing call; empty string if
 * none. The pointer stays valid until the next failing call on the
 * same thread.
 */
const char *tandem_last_error(void);

/**
 * Creates an empty AOI set. Release with `tandem_aoi_set_free`.
 */
struct TandemAoiSet *tandem_aoi_set_new(void);

/**
 * Appends one axis-aligned box. `name` is UTF-8; `min`/`max` are 3
 * doubles each with min < max per axis; `role` is a `TandemAoiRole`
 * value.
 */
TandemStatus tandem_aoi_set_add(struct TandemAoiSet *set,
                                const char *name,
                                const double *min,
                                const double *max,
                                int32_t role);

void tandem_aoi_set_free(struct TandemAoiSet *set);

/**
 * Casts a ray against the set. On a hit writes the box index and the
 * entry distance in meters; on a clean miss writes -1 and NAN. The
 * direction need not be normalized, only nonzero.
 */
TandemStatus tandem_cast_ray(const struct TandemAoiSet *set,
                             const double *origin,
                             const double *direction,
                             int32_t *out_index,
                             double *out_entry);

/**
 * Builds a gaze classifier over a copy of the set. The set must hold
 * exactly one `HumanWorkspace` box and unique names; `dwell_s` is the
 * hysteresis in seconds. The initial label is Working.
 */
TandemStatus tandem_gaze_new(const struct TandemAoiSet *set,
                             double dwell_s,
                             struct TandemGaze **out);

/**
 * Consumes one gaze ray and writes the current label. Timestamps must
 * be strictly increasing.
 */
TandemStatus tandem_gaze_push(struct TandemGaze *gaze,
                              double t,
                              const double *origin,
                              const double *direction,
                              TandemLabel *out_label);

void tandem_gaze_free(struct TandemGaze *gaze);

/**
 * Loads trained weights from a UTF-8 `weights_path` and builds a
 * streaming classifier deciding every `stride` frames once 500 have
 * accumulated; `threshold` splits Idle probability into labels.
 */
TandemStatus tandem_imu_new_from_file(const char *weights_path,
                                      size_t stride,
                                      double threshold,
                                      struct TandemImu **out);

/**
 * Consumes one 36-feature frame at time `t`. Frames must arrive on a
 * contiguous 30 Hz timeline. Writes whether a decision fired and, if
 * so, the label and Idle probability.
 */
TandemStatus tandem_imu_push_frame(struct TandemImu *imu,
                                   double t,
                                   const double *features,
                                   bool *out_decided,
                                   TandemLabel *out_label,
                                   double *out_prob);

void tandem_imu_free(struct TandemImu *imu);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TANDEM_H */
