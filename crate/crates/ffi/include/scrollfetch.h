#ifndef SCROLLFETCH_H
#define SCROLLFETCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_INVALID_TRACE = 3,
  SF_STATUS_INVALID_CONFIG = 4,
  SF_STATUS_IO = 5,
  SF_STATUS_SIMULATION = 6,
  SF_STATUS_PANIC = 7,
} SfStatus;

typedef enum SfPolicy {
  SF_POLICY_NETWORK_AWARE = 0,
  SF_POLICY_NEXT_ONE = 1,
  SF_POLICY_WATERFALL = 2,
} SfPolicy;

typedef enum SfEventKind {
  SF_EVENT_KIND_SESSION_START = 0,
  SF_EVENT_KIND_DOWNLOAD_START = 1,
  SF_EVENT_KIND_DOWNLOAD_COMPLETE = 2,
  SF_EVENT_KIND_DOWNLOAD_ABORT = 3,
  SF_EVENT_KIND_PLAYBACK_START = 4,
  SF_EVENT_KIND_STALL_START = 5,
  SF_EVENT_KIND_STALL_END = 6,
  SF_EVENT_KIND_SCROLL = 7,
  SF_EVENT_KIND_SESSION_END = 8,
} SfEventKind;

typedef enum SfReportFormat {
  SF_REPORT_FORMAT_CSV = 0,
  SF_REPORT_FORMAT_JSON = 1,
} SfReportFormat;

typedef struct SfSessionResult SfSessionResult;

typedef struct SfThroughputTrace SfThroughputTrace;

typedef struct SfUserTrace SfUserTrace;

/**
 * Playlist of identical videos plus per-session settings.
 */
typedef struct SfSessionParams {
  uint32_t videos;
  double duration_s;
  double bitrate_kbps;
  double segment_duration_s;
  uint32_t startup_threshold_segments;
  double throughput_window_s;
  bool count_residual_buffers_as_waste;
  double weight_bitrate;
  double weight_rebuffer;
  double weight_startup;
  double weight_waste;
} SfSessionParams;

typedef struct SfSessionTotals {
  double waste_s;
  double startup_delay_s;
  double rebuffer_s;
  double watched_s;
  double downloaded_s;
  double residual_s;
  double waste_mbit;
  double overall_quality;
} SfSessionTotals;

/**
 * One event-log entry. Absent fields are `-1` (`video`, `segment`) or NaN.
 */
typedef struct SfEvent {
  double t;
  enum SfEventKind kind;
  int64_t video;
  int64_t segment;
  double buffer_s;
  double value;
} SfEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sf_last_error_message(void);

/**
 * Static, NUL-terminated version string.
 */
const char *sf_version(void);

/**
 * Buffer target in segments for measured throughput `alpha_kbps`. Pass
 * `has_alpha = false` before any measurement exists.
 */
uint32_t sf_compute_b1(double alpha_kbps, bool has_alpha, double bitrate_kbps);

/**
 * Number of following videos the network-aware policy may prefetch.
 */
uint32_t sf_compute_lookahead_k(double alpha_kbps, bool has_alpha, double bitrate_kbps);

/**
 * Builds a trace with one value per second.
 *
 * # Safety
 * `kbps` must point to `len` readable doubles; `out` must be writable.
 */
enum SfStatus sf_throughput_trace_from_values(const double *kbps,
                                              size_t len,
                                              bool wrap,
                                              struct SfThroughputTrace **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SfStatus sf_throughput_trace_load(const char *path, bool wrap, struct SfThroughputTrace **out);

/**
 * # Safety
 * `trace` must be a valid handle or null.
 */
double sf_throughput_trace_mean_kbps(const struct SfThroughputTrace *trace);

/**
 * # Safety
 * `trace` must be a handle from this library, or null. Freed handles must
 * not be used again.
 */
void sf_throughput_trace_free(struct SfThroughputTrace *trace);

/**
 * # Safety
 * `durations_s` must point to `len` readable doubles; `out` must be
 * writable.
 */
enum SfStatus sf_user_trace_from_values(const double *durations_s,
                                        size_t len,
                                        struct SfUserTrace **out);

/**
 * Gaussian watch durations summing to at least `total_s`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SfStatus sf_user_trace_generate(double mean_s,
                                     double stddev_s,
                                     double total_s,
                                     uint64_t seed,
                                     struct SfUserTrace **out);

/**
 * # Safety
 * `trace` must be a valid handle or null.
 */
size_t sf_user_trace_len(const struct SfUserTrace *trace);

/**
 * Copies up to `cap` durations into `buf` and returns how many were
 * copied.
 *
 * # Safety
 * `trace` must be a valid handle or null; `buf` must have room for `cap`
 * doubles.
 */
size_t sf_user_trace_copy(const struct SfUserTrace *trace, double *buf, size_t cap);

/**
 * # Safety
 * `trace` must be a handle from this library, or null.
 */
void sf_user_trace_free(struct SfUserTrace *trace);

/**
 * Defaults: one-segment start-up, 10 s window, unit weights, residual
 * buffers counted as waste, 15 s videos of 1 s segments at 2000 kbps.
 */
struct SfSessionParams sf_session_params_default(uint32_t videos);

/**
 * Simulates one session and returns a result handle holding totals and
 * the event log.
 *
 * # Safety
 * `params`, `trace` and `user` must be valid; `out` must be writable.
 */
enum SfStatus sf_simulate(const struct SfSessionParams *params,
                          const struct SfThroughputTrace *trace,
                          const struct SfUserTrace *user,
                          enum SfPolicy policy,
                          struct SfSessionResult **out);

/**
 * # Safety
 * `result` must be a valid handle or null.
 */
struct SfSessionTotals sf_session_result_totals(const struct SfSessionResult *result);

/**
 * # Safety
 * `result` must be a valid handle or null.
 */
size_t sf_session_result_event_count(const struct SfSessionResult *result);

/**
 * # Safety
 * `result` must be a valid handle; `out` must be writable.
 */
enum SfStatus sf_session_result_event(const struct SfSessionResult *result,
                                      size_t index,
                                      struct SfEvent *out);

/**
 * Writes the event log as JSON lines.
 *
 * # Safety
 * `result` must be a valid handle; `path` a NUL-terminated string.
 */
enum SfStatus sf_session_result_write_log(const struct SfSessionResult *result, const char *path);

/**
 * # Safety
 * `result` must be a handle from this library, or null.
 */
void sf_session_result_free(struct SfSessionResult *result);

/**
 * Runs a whole experiment config and writes its report into `out_dir`.
 * Event logs are written when `event_logs` is true.
 *
 * # Safety
 * `config_path` and `out_dir` must be NUL-terminated strings.
 */
enum SfStatus sf_run_experiment(const char *config_path,
                                const char *out_dir,
                                enum SfReportFormat format,
                                bool event_logs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCROLLFETCH_H */
