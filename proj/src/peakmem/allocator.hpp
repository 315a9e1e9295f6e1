// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Caching-allocator simulator.
//
// Requests are rounded to the alignment, served best-fit from cached free
// blocks ordered by (stream, size, address), split when larger, and coalesced
// with free neighbours on release. A miss reserves a new segment sized by
// segment_size_for(). When the device budget is exhausted the allocator first
// returns whole free segments above max_split_size, then every whole free
// segment, and retries once.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "peakmem/common.hpp"

namespace peakmem {

struct AllocatorConfig {
  Bytes small_size = 1 * kMiB;
  Bytes small_buffer = 2 * kMiB;
  Bytes min_large_alloc = 10 * kMiB;
  Bytes large_buffer = 20 * kMiB;
  Bytes round_large = 2 * kMiB;
  Bytes alignment = 512;
  std::optional<Bytes> max_split_size;   // unbounded when empty
  std::optional<Bytes> device_capacity;  // unbounded when empty

  void validate() const;
  bool operator==(const AllocatorConfig&) const = default;
};

// Smallest multiple of the alignment that is >= size. Throws ZeroSize.
Bytes round_request(Bytes size, const AllocatorConfig& cfg = {});

// Segment to reserve for a (rounded) request.
Bytes segment_size_for(Bytes size, const AllocatorConfig& cfg = {});

using Handle = std::uint64_t;

struct BlockView {
  Bytes offset = 0;
  Bytes size = 0;
  bool allocated = false;
};

struct SegmentView {
  Bytes base = 0;
  Bytes size = 0;
  int stream = 0;
  std::vector<BlockView> blocks;  // ordered by offset
};

class CachingAllocator {
 public:
  explicit CachingAllocator(AllocatorConfig cfg);

  // Throws ZeroSize, DuplicateHandle, or OutOfMemory. Segments released while
  // trying to make room stay released after an OutOfMemory.
  void allocate(Handle handle, Bytes size, int stream = 0);
  // Throws UnknownHandle or DoubleFree.
  void free(Handle handle);

  Bytes reserved_bytes() const noexcept { return reserved_; }
  Bytes allocated_bytes() const noexcept { return allocated_; }
  Bytes peak_reserved() const noexcept { return peak_reserved_; }
  Bytes peak_allocated() const noexcept { return peak_allocated_; }
  std::size_t segments_released() const noexcept { return segments_released_; }
  std::size_t segment_count() const noexcept { return segments_.size(); }
  // Size actually handed out for a live handle (rounded, or a whole block).
  std::optional<Bytes> block_size(Handle handle) const;
  const AllocatorConfig& config() const noexcept { return cfg_; }

  std::vector<SegmentView> segments() const;

  // Conservation, tiling, no adjacent free blocks, alignment, counter bounds and
  // pool consistency. Returns a description of the first violation found.
  std::optional<std::string> check_invariants() const;

 private:
  struct Block {
    Bytes size = 0;
    bool allocated = false;
  };
  struct Segment {
    Bytes size = 0;
    int stream = 0;
    std::map<Bytes, Block> blocks;  // offset -> block
  };
  // (stream, size, address)
  using PoolKey = std::tuple<int, Bytes, Bytes>;

  bool fits(Bytes segment_size) const;
  bool is_oversize(Bytes block_size) const;
  std::optional<Bytes> find_free_block(int stream, Bytes rounded) const;
  Bytes reserve_segment(Bytes size, int stream);
  void release_segment(Bytes base);
  bool release_cached_segments(Bytes needed);
  Bytes carve(Bytes addr, Bytes rounded);
  std::map<Bytes, Segment>::iterator segment_of(Bytes addr);
  std::map<Bytes, Segment>::const_iterator segment_of(Bytes addr) const;

  AllocatorConfig cfg_;
  std::map<Bytes, Segment> segments_;  // base -> segment
  std::set<PoolKey> free_pool_;
  std::unordered_map<Handle, Bytes> live_;  // handle -> address
  std::unordered_set<Handle> retired_;
  Bytes next_base_ = 0;
  Bytes reserved_ = 0;
  Bytes allocated_ = 0;
  Bytes peak_reserved_ = 0;
  Bytes peak_allocated_ = 0;
  std::size_t segments_released_ = 0;
};

}  // namespace peakmem
