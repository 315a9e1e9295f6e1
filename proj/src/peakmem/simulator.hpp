// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peakmem/allocator.hpp"
#include "peakmem/sequence.hpp"

namespace peakmem {

struct TimelinePoint {
  std::size_t seq_no = 0;
  Bytes reserved = 0;
  Bytes allocated = 0;

  bool operator==(const TimelinePoint&) const = default;
};

struct SimulationResult {
  Bytes peak_reserved = 0;
  Bytes peak_allocated = 0;
  Bytes final_reserved = 0;   // at the end, or at the failing request
  Bytes final_allocated = 0;
  std::vector<TimelinePoint> timeline;  // one point per applied request
  std::optional<std::size_t> oom_seq_no;
  std::string oom_message;
  std::size_t segments_released = 0;
};

struct ReplayOptions {
  bool record_timeline = true;
  // Verify allocator invariants after every request; a violation throws Internal.
  bool check_invariants = false;
};

// Applies the requests in order. Sequence numbers must be strictly increasing
// and every free must follow its block's alloc, otherwise MalformedSequence is
// thrown before anything is simulated. OutOfMemory stops the replay and is
// reported through oom_seq_no.
SimulationResult replay(std::span<const MemoryRequest> requests, const AllocatorConfig& cfg,
                        const ReplayOptions& options = {});

std::string serialize_result(const SimulationResult& result, bool include_timeline);

}  // namespace peakmem
