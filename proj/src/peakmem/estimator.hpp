// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>

#include "peakmem/allocator.hpp"
#include "peakmem/link.hpp"
#include "peakmem/orchestrate.hpp"
#include "peakmem/simulator.hpp"
#include "peakmem/trace.hpp"

namespace peakmem {

struct EstimateOptions {
  AllocatorConfig allocator;              // device_capacity is ignored; see below
  std::optional<Bytes> device_capacity;   // falls back to the sidecar; unbounded if neither
  std::size_t iterations = 2;
  std::string config_id;
};

struct EstimateReport {
  std::string config_id;
  Bytes predicted_peak = 0;   // peak reserved bytes, excluding initial_memory
  Bytes reserved_peak = 0;
  Bytes allocated_peak = 0;
  Bytes initial_memory = 0;
  std::optional<Bytes> device_capacity;
  bool oom_predicted = false;
  std::optional<std::size_t> oom_seq_no;
  std::map<std::string, Bytes> phase_breakdown;  // requested bytes per block role
  std::size_t sequence_length = 0;
  std::size_t iterations = 0;
  std::string config_digest;
};

// Replays `sequence` against capacity - initial_memory. An OutOfMemory during
// replay marks the report as OOM and keeps the state reached at that point.
EstimateReport estimate_sequence(const RequestSequence& sequence, const Sidecar& sidecar,
                                 const EstimateOptions& options);

// analyze -> orchestrate -> replay.
EstimateReport estimate(const TraceAnalysis& analysis, const Sidecar& sidecar,
                        const EstimateOptions& options);

// Deterministic JSON with sorted keys. `stamp`, when non-empty, is added as
// "generated_at".
std::string serialize_report(const EstimateReport& report, const std::string& stamp = {});

}  // namespace peakmem
