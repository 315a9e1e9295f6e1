// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/simulator.hpp"

#include <unordered_map>

#include "json.hpp"

namespace peakmem {

namespace {

void validate(std::span<const MemoryRequest> requests) {
  enum class State { Live, Freed };
  std::unordered_map<std::size_t, State> blocks;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const MemoryRequest& r = requests[i];
    const std::string where = "seq_no " + std::to_string(r.seq_no);
    if (i > 0 && r.seq_no <= requests[i - 1].seq_no) {
      throw Error(ErrorCode::MalformedSequence, where + ": sequence numbers must increase");
    }
    const auto it = blocks.find(r.block_id);
    if (r.kind == RequestKind::Alloc) {
      if (it != blocks.end()) throw Error(ErrorCode::MalformedSequence, where + ": block allocated twice");
      if (r.size == 0) throw Error(ErrorCode::MalformedSequence, where + ": zero-size allocation");
      blocks.emplace(r.block_id, State::Live);
    } else {
      if (it == blocks.end()) throw Error(ErrorCode::MalformedSequence, where + ": free before alloc");
      if (it->second == State::Freed) throw Error(ErrorCode::MalformedSequence, where + ": block freed twice");
      it->second = State::Freed;
    }
  }
}

}  // namespace

SimulationResult replay(std::span<const MemoryRequest> requests, const AllocatorConfig& cfg,
                        const ReplayOptions& options) {
  validate(requests);
  CachingAllocator allocator(cfg);
  SimulationResult result;
  if (options.record_timeline) result.timeline.reserve(requests.size());

  for (const MemoryRequest& r : requests) {
    try {
      if (r.kind == RequestKind::Alloc) {
        allocator.allocate(r.block_id, r.size, r.stream);
      } else {
        allocator.free(r.block_id);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfMemory) throw;
      result.oom_seq_no = r.seq_no;
      result.oom_message = e.what();
      break;
    }
    if (options.check_invariants) {
      if (auto violation = allocator.check_invariants()) {
        throw Error(ErrorCode::Internal, "invariant violated after seq_no " + std::to_string(r.seq_no) +
                                             ": " + *violation);
      }
    }
    if (options.record_timeline) {
      result.timeline.push_back({r.seq_no, allocator.reserved_bytes(), allocator.allocated_bytes()});
    }
  }
  result.peak_reserved = allocator.peak_reserved();
  result.peak_allocated = allocator.peak_allocated();
  result.final_reserved = allocator.reserved_bytes();
  result.final_allocated = allocator.allocated_bytes();
  result.segments_released = allocator.segments_released();
  return result;
}

std::string serialize_result(const SimulationResult& result, bool include_timeline) {
  nlohmann::json doc = {{"peak_reserved", result.peak_reserved},
                        {"peak_allocated", result.peak_allocated},
                        {"final_reserved", result.final_reserved},
                        {"final_allocated", result.final_allocated},
                        {"segments_released", result.segments_released},
                        {"oom_seq_no", result.oom_seq_no ? nlohmann::json(*result.oom_seq_no) : nlohmann::json(nullptr)}};
  if (include_timeline) {
    auto& timeline = doc["timeline"] = nlohmann::json::array();
    for (const auto& p : result.timeline) {
      timeline.push_back({{"seq_no", p.seq_no}, {"reserved", p.reserved}, {"allocated", p.allocated}});
    }
  }
  return doc.dump(2) + "\n";
}

}  // namespace peakmem
