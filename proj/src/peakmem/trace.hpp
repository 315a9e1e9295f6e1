// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Profiler trace ingest.
//
// Input is the Chrome trace-event JSON written by the framework profiler: either
// a bare array of events or an object holding them under "traceEvents". Each
// event carries "ph", "cat", "name", "ts" and "dur" (microseconds, fractional)
// and an "args" object. Only four categories are interpreted; every other event
// is kept as EventCategory::Other without parsed metadata.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peakmem/common.hpp"

namespace peakmem {

enum class EventCategory { PythonFunction, CpuOp, UserAnnotation, CpuInstantEvent, Other };

std::string_view to_string(EventCategory category) noexcept;

struct TraceEvent {
  std::size_t event_id = 0;  // ordinal position in the source file
  EventCategory category = EventCategory::Other;
  std::string name;
  TimeNs start_ts = 0;
  TimeNs duration = 0;

  std::optional<std::int64_t> function_id;      // PythonFunction
  std::optional<std::int64_t> parent_id;        // PythonFunction
  std::optional<std::int64_t> sequence_number;  // CpuOp
  std::optional<std::uint64_t> addr;            // CpuInstantEvent
  std::optional<std::int64_t> bytes;            // CpuInstantEvent, negative = free
  std::optional<std::int64_t> total_allocated;
  std::optional<std::int64_t> total_reserved;

  // Raw "ph" and "cat" strings, kept so a normalized bundle serializes back
  // to an equivalent file.
  std::string phase;
  std::string raw_category;

  TimeNs end_ts() const noexcept { return start_ts + duration; }

  bool operator==(const TraceEvent&) const = default;
};

// Sidecar metadata recorded at capture time.
struct Sidecar {
  std::vector<Bytes> param_sizes;
  std::vector<Bytes> batch_bytes;
  std::string optimizer;
  Bytes device_capacity = 0;
  Bytes initial_memory = 0;
  // python_function name prefixes that identify a model layer call.
  std::vector<std::string> layer_prefixes{"nn.Module: "};

  bool operator==(const Sidecar&) const = default;
};

struct TraceBundle {
  std::vector<TraceEvent> events;  // sorted by (start_ts, event_id)
  std::string source_path;
  std::optional<Sidecar> metadata;
};

struct ParseOptions {
  bool strict = false;  // reject unknown categories instead of keeping them as Other
};

TraceBundle parse_trace(const std::filesystem::path& path, const ParseOptions& options = {});
TraceBundle parse_trace_text(std::string_view text, std::string source_path,
                             const ParseOptions& options = {});

Sidecar parse_sidecar(const std::filesystem::path& path);
Sidecar parse_sidecar_text(std::string_view text);
std::string serialize_sidecar(const Sidecar& sidecar);

// Stable-ordered subsequence of events in one category.
std::vector<TraceEvent> filter_category(const TraceBundle& bundle, EventCategory category);

// Canonical trace JSON for a normalized bundle. Parsing the output yields an
// equal event list.
std::string serialize_trace(const TraceBundle& bundle);

std::string read_file(const std::filesystem::path& path);

}  // namespace peakmem
