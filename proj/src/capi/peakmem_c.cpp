// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/peakmem.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "json.hpp"
#include "peakmem/allocator.hpp"
#include "peakmem/estimator.hpp"
#include "peakmem/link.hpp"
#include "peakmem/metrics.hpp"
#include "peakmem/orchestrate.hpp"
#include "peakmem/selftest.hpp"
#include "peakmem/simulator.hpp"
#include "peakmem/trace.hpp"

struct peakmem_session {
  peakmem::Sidecar sidecar;
  peakmem::TraceAnalysis analysis;
  std::string stem;
};

struct peakmem_allocator {
  explicit peakmem_allocator(peakmem::AllocatorConfig cfg) : impl(std::move(cfg)) {}
  peakmem::CachingAllocator impl;
};

namespace {

static_assert(static_cast<int>(peakmem::ErrorCode::InvalidArgument) == PEAKMEM_INVALID_ARGUMENT);
static_assert(static_cast<int>(peakmem::ErrorCode::NoIterations) == PEAKMEM_NO_ITERATIONS);
static_assert(static_cast<int>(peakmem::ErrorCode::OutOfMemory) == PEAKMEM_OUT_OF_MEMORY);
static_assert(static_cast<int>(peakmem::ErrorCode::Internal) == PEAKMEM_INTERNAL);
static_assert(static_cast<int>(peakmem::Quadrant::Worst) == PEAKMEM_QUADRANT_WORST);

thread_local std::string g_last_error;

peakmem_status fail(peakmem_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs fn, translating exceptions into a status and the thread's last error.
template <typename Fn>
peakmem_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return PEAKMEM_OK;
  } catch (const peakmem::Error& e) {
    return fail(static_cast<peakmem_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PEAKMEM_INTERNAL, "out of host memory");
  } catch (const std::exception& e) {
    return fail(PEAKMEM_INTERNAL, e.what());
  } catch (...) {
    return fail(PEAKMEM_INTERNAL, "unknown exception");
  }
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw peakmem::Error(peakmem::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

peakmem::AllocatorConfig to_config(const peakmem_allocator_config* c) {
  peakmem::AllocatorConfig cfg;
  if (c != nullptr) {
    if (c->max_split_size != 0) cfg.max_split_size = c->max_split_size;
    if (c->device_capacity != 0) cfg.device_capacity = c->device_capacity;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

extern "C" {

const char* peakmem_version(void) { return "0.1.0"; }

const char* peakmem_status_string(peakmem_status status) {
  if (status == PEAKMEM_OK) return "ok";
  if (status < PEAKMEM_OK || status > PEAKMEM_INTERNAL) return "unknown status";
  return peakmem::to_string(static_cast<peakmem::ErrorCode>(status)).data();
}

const char* peakmem_last_error(void) { return g_last_error.c_str(); }

void peakmem_string_free(char* str) { std::free(str); }

peakmem_status peakmem_parse_size(const char* text, uint64_t* out_bytes) {
  return guarded([&] {
    require(text, "text");
    require(out_bytes, "out_bytes");
    *out_bytes = peakmem::parse_size(text);
  });
}

peakmem_status peakmem_session_open(const char* trace_path, const char* sidecar_path, int strict,
                                    peakmem_session** out_session) {
  return guarded([&] {
    require(trace_path, "trace_path");
    require(out_session, "out_session");
    *out_session = nullptr;
    const auto bundle = peakmem::parse_trace(trace_path, peakmem::ParseOptions{strict != 0});
    auto session = std::make_unique<peakmem_session>();
    if (sidecar_path != nullptr) {
      session->sidecar = peakmem::parse_sidecar(sidecar_path);
    } else if (bundle.metadata) {
      session->sidecar = *bundle.metadata;
    }
    session->analysis = peakmem::analyze_trace(bundle, session->sidecar.layer_prefixes);
    std::string stem = std::filesystem::path(trace_path).filename().string();
    for (const char* suffix : {".json", ".trace"}) {
      if (stem.ends_with(suffix)) stem.resize(stem.size() - std::strlen(suffix));
    }
    session->stem = std::move(stem);
    *out_session = session.release();
  });
}

void peakmem_session_close(peakmem_session* session) { delete session; }

peakmem_status peakmem_session_warnings(const peakmem_session* session, char** out_json) {
  return guarded([&] {
    require(session, "session");
    require(out_json, "out_json");
    *out_json = dup_string(nlohmann::json(session->analysis.warnings).dump());
  });
}

peakmem_status peakmem_session_estimate(const peakmem_session* session, const peakmem_estimate_options* options,
                                        char** out_report_json, int* out_oom_predicted) {
  return guarded([&] {
    require(session, "session");
    require(out_report_json, "out_report_json");
    peakmem::EstimateOptions opts;
    std::string stamp;
    if (options != nullptr) {
      if (options->allocator.max_split_size != 0) opts.allocator.max_split_size = options->allocator.max_split_size;
      if (options->allocator.device_capacity != 0) opts.device_capacity = options->allocator.device_capacity;
      if (options->iterations != 0) opts.iterations = options->iterations;
      if (options->config_id != nullptr) opts.config_id = options->config_id;
      if (options->stamp != nullptr) stamp = options->stamp;
    }
    opts.allocator.validate();
    if (opts.config_id.empty()) opts.config_id = session->stem;
    const auto report = peakmem::estimate(session->analysis, session->sidecar, opts);
    *out_report_json = dup_string(peakmem::serialize_report(report, stamp));
    if (out_oom_predicted != nullptr) *out_oom_predicted = report.oom_predicted ? 1 : 0;
  });
}

peakmem_status peakmem_session_dump_structure(const peakmem_session* session, char** out_json) {
  return guarded([&] {
    require(session, "session");
    require(out_json, "out_json");
    *out_json = dup_string(peakmem::dump_structure(session->analysis) + "\n");
  });
}

peakmem_status peakmem_session_dump_sequence(const peakmem_session* session, uint32_t iterations,
                                             char** out_json) {
  return guarded([&] {
    require(session, "session");
    require(out_json, "out_json");
    const auto seq = peakmem::build_sequence(session->analysis, session->sidecar,
                                             peakmem::OrchestrationOptions{iterations == 0 ? 2u : iterations});
    *out_json = dup_string(peakmem::serialize_sequence(seq));
  });
}

peakmem_status peakmem_replay(const char* sequence_json, const peakmem_allocator_config* config,
                              int emit_timeline, char** out_result_json) {
  return guarded([&] {
    require(sequence_json, "sequence_json");
    require(out_result_json, "out_result_json");
    const auto seq = peakmem::parse_sequence_text(sequence_json);
    const auto result = peakmem::replay(seq.requests, to_config(config), {.record_timeline = emit_timeline != 0});
    *out_result_json = dup_string(peakmem::serialize_result(result, emit_timeline != 0));
  });
}

peakmem_status peakmem_evaluate(const char* reports_dir, const char* actuals_path, char** out_metrics_json) {
  return guarded([&] {
    require(reports_dir, "reports_dir");
    require(actuals_path, "actuals_path");
    require(out_metrics_json, "out_metrics_json");
    *out_metrics_json = dup_string(peakmem::evaluate(reports_dir, actuals_path));
  });
}

peakmem_status peakmem_selftest(uint64_t seed, uint64_t count, char** out_json, int* out_ok) {
  return guarded([&] {
    require(out_json, "out_json");
    const auto summary = peakmem::run_selftest(seed, count);
    *out_json = dup_string(peakmem::serialize_selftest(summary));
    if (out_ok != nullptr) *out_ok = summary.ok() ? 1 : 0;
  });
}

peakmem_status peakmem_allocator_create(const peakmem_allocator_config* config, peakmem_allocator** out_allocator) {
  return guarded([&] {
    require(out_allocator, "out_allocator");
    *out_allocator = new peakmem_allocator(to_config(config));
  });
}

void peakmem_allocator_destroy(peakmem_allocator* allocator) { delete allocator; }

peakmem_status peakmem_allocator_alloc(peakmem_allocator* allocator, uint64_t handle, uint64_t size, int stream) {
  return guarded([&] {
    require(allocator, "allocator");
    allocator->impl.allocate(handle, size, stream);
  });
}

peakmem_status peakmem_allocator_free(peakmem_allocator* allocator, uint64_t handle) {
  return guarded([&] {
    require(allocator, "allocator");
    allocator->impl.free(handle);
  });
}

peakmem_status peakmem_allocator_stats_get(const peakmem_allocator* allocator, peakmem_allocator_stats* out_stats) {
  return guarded([&] {
    require(allocator, "allocator");
    require(out_stats, "out_stats");
    const auto& a = allocator->impl;
    *out_stats = {a.reserved_bytes(), a.allocated_bytes(), a.peak_reserved(),
                  a.peak_allocated(), a.segment_count(),   a.segments_released()};
  });
}

peakmem_status peakmem_allocator_check(const peakmem_allocator* allocator) {
  if (allocator == nullptr) return fail(PEAKMEM_INVALID_ARGUMENT, "allocator is null");
  if (auto violation = allocator->impl.check_invariants()) return fail(PEAKMEM_INTERNAL, *violation);
  return PEAKMEM_OK;
}

peakmem_status peakmem_round_request(uint64_t size, uint64_t* out_bytes) {
  return guarded([&] {
    require(out_bytes, "out_bytes");
    *out_bytes = peakmem::round_request(size);
  });
}

uint64_t peakmem_segment_size(uint64_t rounded_size) { return peakmem::segment_size_for(rounded_size); }

int peakmem_predict_oom(uint64_t predicted_peak, uint64_t capacity) {
  return peakmem::predict_oom(predicted_peak, capacity) ? 1 : 0;
}

int peakmem_correctness_round1(int predicted_oom, int actual_oom) {
  return peakmem::correctness_round1(predicted_oom != 0, actual_oom != 0) ? 1 : 0;
}

int peakmem_correctness_round2(int c1, int oom1, int oom2) {
  return peakmem::correctness_round2(c1 != 0, oom1 != 0, oom2 != 0) ? 1 : 0;
}

peakmem_status peakmem_relative_error(uint64_t predicted, uint64_t actual, double* out_error) {
  return guarded([&] {
    require(out_error, "out_error");
    *out_error = peakmem::relative_error(predicted, actual);
  });
}

int64_t peakmem_memory_saved(uint64_t capacity, uint64_t predicted_peak, int c1, int oom1, int oom2) {
  return peakmem::memory_saved(capacity, predicted_peak, c1 != 0, oom1 != 0, oom2 != 0);
}

peakmem_quadrant peakmem_quadrant_of(double failure_probability, double median_error) {
  return static_cast<peakmem_quadrant>(peakmem::quadrant(failure_probability, median_error));
}

}  // extern "C"
