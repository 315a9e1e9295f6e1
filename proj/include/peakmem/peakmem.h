/* SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the peakmem library: peak GPU memory estimation from
 * CPU-side profiler traces.
 *
 * Conventions:
 *  - Every fallible call returns a peakmem_status. On failure a message is
 *    available from peakmem_last_error() on the calling thread until the next
 *    failing call on that thread.
 *  - Strings returned through char** out-parameters are owned by the caller
 *    and must be released with peakmem_string_free().
 *  - Sizes are bytes. A zero max_split_size or device_capacity means
 *    "unbounded".
 */
#ifndef PEAKMEM_PEAKMEM_H
#define PEAKMEM_PEAKMEM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PEAKMEM_BUILDING_LIBRARY)
#    define PEAKMEM_API __declspec(dllexport)
#  else
#    define PEAKMEM_API __declspec(dllimport)
#  endif
#else
#  define PEAKMEM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum peakmem_status {
  PEAKMEM_OK = 0,
  PEAKMEM_INVALID_ARGUMENT = 1,
  PEAKMEM_IO = 2,
  PEAKMEM_MALFORMED_TRACE = 3,
  PEAKMEM_EMPTY_TRACE = 4,
  PEAKMEM_UNKNOWN_CATEGORY = 5,
  PEAKMEM_MALFORMED_SIDECAR = 6,
  PEAKMEM_CYCLIC_PARENT_LINK = 7,
  PEAKMEM_NO_ITERATION_MARKERS = 8,
  PEAKMEM_NO_GRADIENT_BLOCKS = 9,
  PEAKMEM_MISSING_BATCH_BYTES = 10,
  PEAKMEM_NO_ITERATIONS = 11,
  PEAKMEM_MALFORMED_SEQUENCE = 12,
  PEAKMEM_OUT_OF_MEMORY = 13,
  PEAKMEM_DUPLICATE_HANDLE = 14,
  PEAKMEM_UNKNOWN_HANDLE = 15,
  PEAKMEM_DOUBLE_FREE = 16,
  PEAKMEM_ZERO_SIZE = 17,
  PEAKMEM_EMPTY_INPUT = 18,
  PEAKMEM_INTERNAL = 19
} peakmem_status;

typedef enum peakmem_quadrant {
  PEAKMEM_QUADRANT_OPTIMAL = 0,
  PEAKMEM_QUADRANT_UNDERESTIMATION = 1,
  PEAKMEM_QUADRANT_OVERESTIMATION = 2,
  PEAKMEM_QUADRANT_WORST = 3
} peakmem_quadrant;

typedef struct peakmem_allocator_config {
  uint64_t max_split_size;  /* 0 = unbounded */
  uint64_t device_capacity; /* 0 = unbounded */
} peakmem_allocator_config;

typedef struct peakmem_estimate_options {
  peakmem_allocator_config allocator; /* allocator.device_capacity 0 = take it from the sidecar */
  uint32_t iterations;                /* 0 = default (2) */
  const char* config_id;              /* NULL = trace file stem */
  const char* stamp;                  /* NULL = no "generated_at" field */
} peakmem_estimate_options;

typedef struct peakmem_allocator_stats {
  uint64_t reserved;
  uint64_t allocated;
  uint64_t peak_reserved;
  uint64_t peak_allocated;
  uint64_t segment_count;
  uint64_t segments_released;
} peakmem_allocator_stats;

typedef struct peakmem_session peakmem_session;
typedef struct peakmem_allocator peakmem_allocator;

PEAKMEM_API const char* peakmem_version(void);
PEAKMEM_API const char* peakmem_status_string(peakmem_status status);
PEAKMEM_API const char* peakmem_last_error(void);
PEAKMEM_API void peakmem_string_free(char* str);

/* "512", "1.5GiB", "64 MiB" ... */
PEAKMEM_API peakmem_status peakmem_parse_size(const char* text, uint64_t* out_bytes);

/* Trace session. sidecar_path may be NULL when the trace embeds its metadata. */
PEAKMEM_API peakmem_status peakmem_session_open(const char* trace_path, const char* sidecar_path,
                                                int strict, peakmem_session** out_session);
PEAKMEM_API void peakmem_session_close(peakmem_session* session);
/* JSON array of analysis warnings. */
PEAKMEM_API peakmem_status peakmem_session_warnings(const peakmem_session* session, char** out_json);
PEAKMEM_API peakmem_status peakmem_session_estimate(const peakmem_session* session,
                                                    const peakmem_estimate_options* options,
                                                    char** out_report_json, int* out_oom_predicted);
PEAKMEM_API peakmem_status peakmem_session_dump_structure(const peakmem_session* session, char** out_json);
PEAKMEM_API peakmem_status peakmem_session_dump_sequence(const peakmem_session* session, uint32_t iterations,
                                                         char** out_json);

/* Replays a sequence document. OOM is reported in the result, not as a status. */
PEAKMEM_API peakmem_status peakmem_replay(const char* sequence_json, const peakmem_allocator_config* config,
                                          int emit_timeline, char** out_result_json);

PEAKMEM_API peakmem_status peakmem_evaluate(const char* reports_dir, const char* actuals_path,
                                            char** out_metrics_json);

PEAKMEM_API peakmem_status peakmem_selftest(uint64_t seed, uint64_t count, char** out_json, int* out_ok);

/* Allocator simulator. */
PEAKMEM_API peakmem_status peakmem_allocator_create(const peakmem_allocator_config* config,
                                                    peakmem_allocator** out_allocator);
PEAKMEM_API void peakmem_allocator_destroy(peakmem_allocator* allocator);
PEAKMEM_API peakmem_status peakmem_allocator_alloc(peakmem_allocator* allocator, uint64_t handle, uint64_t size,
                                                   int stream);
PEAKMEM_API peakmem_status peakmem_allocator_free(peakmem_allocator* allocator, uint64_t handle);
PEAKMEM_API peakmem_status peakmem_allocator_stats_get(const peakmem_allocator* allocator,
                                                       peakmem_allocator_stats* out_stats);
/* PEAKMEM_OK when all invariants hold; PEAKMEM_INTERNAL with the violation in last_error otherwise. */
PEAKMEM_API peakmem_status peakmem_allocator_check(const peakmem_allocator* allocator);

/* Closed-form helpers. */
PEAKMEM_API peakmem_status peakmem_round_request(uint64_t size, uint64_t* out_bytes);
PEAKMEM_API uint64_t peakmem_segment_size(uint64_t rounded_size);
PEAKMEM_API int peakmem_predict_oom(uint64_t predicted_peak, uint64_t capacity);
PEAKMEM_API int peakmem_correctness_round1(int predicted_oom, int actual_oom);
PEAKMEM_API int peakmem_correctness_round2(int c1, int oom1, int oom2);
PEAKMEM_API peakmem_status peakmem_relative_error(uint64_t predicted, uint64_t actual, double* out_error);
PEAKMEM_API int64_t peakmem_memory_saved(uint64_t capacity, uint64_t predicted_peak, int c1, int oom1, int oom2);
PEAKMEM_API peakmem_quadrant peakmem_quadrant_of(double failure_probability, double median_error);

#ifdef __cplusplus
}
#endif

#endif /* PEAKMEM_PEAKMEM_H */
