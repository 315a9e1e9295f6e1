// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/allocator.hpp"

#include <algorithm>
#include <cassert>
#include <iterator>

namespace peakmem {

void AllocatorConfig::validate() const {
  auto positive = [](Bytes v, const char* name) {
    if (v == 0) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be positive");
  };
  positive(small_size, "small_size");
  positive(small_buffer, "small_buffer");
  positive(min_large_alloc, "min_large_alloc");
  positive(large_buffer, "large_buffer");
  positive(round_large, "round_large");
  positive(alignment, "alignment");
  if ((alignment & (alignment - 1)) != 0) {
    throw Error(ErrorCode::InvalidArgument, "alignment must be a power of two");
  }
  if (max_split_size && *max_split_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "max_split_size must be positive when set");
  }
}

Bytes round_request(Bytes size, const AllocatorConfig& cfg) {
  if (size == 0) throw Error(ErrorCode::ZeroSize, "request of zero bytes");
  return (size + cfg.alignment - 1) / cfg.alignment * cfg.alignment;
}

Bytes segment_size_for(Bytes size, const AllocatorConfig& cfg) {
  if (size <= cfg.small_size) return cfg.small_buffer;
  if (size <= cfg.min_large_alloc) return cfg.large_buffer;
  return cfg.round_large * ((size + cfg.round_large - 1) / cfg.round_large);
}

CachingAllocator::CachingAllocator(AllocatorConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

bool CachingAllocator::fits(Bytes segment_size) const {
  return !cfg_.device_capacity || reserved_ + segment_size <= *cfg_.device_capacity;
}

bool CachingAllocator::is_oversize(Bytes block_size) const {
  return cfg_.max_split_size && block_size > *cfg_.max_split_size;
}

std::map<Bytes, CachingAllocator::Segment>::iterator CachingAllocator::segment_of(Bytes addr) {
  auto it = segments_.upper_bound(addr);
  assert(it != segments_.begin());
  return std::prev(it);
}

std::map<Bytes, CachingAllocator::Segment>::const_iterator CachingAllocator::segment_of(
    Bytes addr) const {
  auto it = segments_.upper_bound(addr);
  assert(it != segments_.begin());
  return std::prev(it);
}

std::optional<Bytes> CachingAllocator::find_free_block(int stream, Bytes rounded) const {
  const auto it = free_pool_.lower_bound(PoolKey{stream, rounded, 0});
  if (it == free_pool_.end() || std::get<0>(*it) != stream) return std::nullopt;
  const Bytes size = std::get<1>(*it);
  // An oversize block is only handed out whole, and only when little would be
  // wasted. Larger candidates waste more, so the smallest one decides.
  if (is_oversize(size) && size - rounded >= *cfg_.max_split_size) return std::nullopt;
  return std::get<2>(*it);
}

Bytes CachingAllocator::reserve_segment(Bytes size, int stream) {
  const Bytes base = next_base_;
  next_base_ += size;
  Segment segment;
  segment.size = size;
  segment.stream = stream;
  segment.blocks.emplace(0, Block{size, false});
  segments_.emplace(base, std::move(segment));
  free_pool_.emplace(stream, size, base);
  reserved_ += size;
  peak_reserved_ = std::max(peak_reserved_, reserved_);
  return base;
}

void CachingAllocator::release_segment(Bytes base) {
  auto it = segments_.find(base);
  assert(it != segments_.end() && it->second.blocks.size() == 1);
  free_pool_.erase(PoolKey{it->second.stream, it->second.size, base});
  reserved_ -= it->second.size;
  segments_.erase(it);
  ++segments_released_;
}

bool CachingAllocator::release_cached_segments(Bytes needed) {
  auto whole_free = [](const Segment& s) {
    return s.blocks.size() == 1 && !s.blocks.begin()->second.allocated;
  };

  if (cfg_.max_split_size) {
    std::vector<std::pair<Bytes, Bytes>> oversize;  // (size, base)
    for (const auto& [base, segment] : segments_) {
      if (whole_free(segment) && segment.size > *cfg_.max_split_size) {
        oversize.emplace_back(segment.size, base);
      }
    }
    // Largest first; equal sizes by lowest address.
    std::sort(oversize.begin(), oversize.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [size, base] : oversize) {
      if (fits(needed)) break;
      release_segment(base);
    }
    if (fits(needed)) return true;
  }

  std::vector<Bytes> idle;
  for (const auto& [base, segment] : segments_) {
    if (whole_free(segment)) idle.push_back(base);
  }
  for (Bytes base : idle) release_segment(base);
  return fits(needed);
}

Bytes CachingAllocator::carve(Bytes addr, Bytes rounded) {
  auto seg_it = segment_of(addr);
  Segment& segment = seg_it->second;
  const Bytes offset = addr - seg_it->first;
  auto block_it = segment.blocks.find(offset);
  assert(block_it != segment.blocks.end() && !block_it->second.allocated);
  Block& block = block_it->second;

  free_pool_.erase(PoolKey{segment.stream, block.size, addr});
  if (!is_oversize(block.size) && block.size > rounded) {
    const Bytes remainder = block.size - rounded;
    // Both sizes are aligned, so a remainder is never smaller than the alignment.
    assert(remainder >= cfg_.alignment);
    segment.blocks.emplace(offset + rounded, Block{remainder, false});
    free_pool_.emplace(segment.stream, remainder, addr + rounded);
    block.size = rounded;
  }
  block.allocated = true;
  allocated_ += block.size;
  peak_allocated_ = std::max(peak_allocated_, allocated_);
  return block.size;
}

void CachingAllocator::allocate(Handle handle, Bytes size, int stream) {
  const Bytes rounded = round_request(size, cfg_);
  if (live_.contains(handle) || retired_.contains(handle)) {
    throw Error(ErrorCode::DuplicateHandle, "handle " + std::to_string(handle) + " already used");
  }

  std::optional<Bytes> addr = find_free_block(stream, rounded);
  if (!addr) {
    const Bytes segment_size = segment_size_for(rounded, cfg_);
    if (!fits(segment_size) && !release_cached_segments(segment_size)) {
      throw Error(ErrorCode::OutOfMemory,
                  "cannot reserve a segment of " + std::to_string(segment_size) +
                      " bytes for a request of " + std::to_string(size) + " bytes (reserved " +
                      std::to_string(reserved_) + " of " + std::to_string(*cfg_.device_capacity) +
                      ")");
    }
    addr = reserve_segment(segment_size, stream);
  }
  carve(*addr, rounded);
  live_.emplace(handle, *addr);
}

void CachingAllocator::free(Handle handle) {
  const auto live_it = live_.find(handle);
  if (live_it == live_.end()) {
    if (retired_.contains(handle)) {
      throw Error(ErrorCode::DoubleFree, "handle " + std::to_string(handle) + " freed twice");
    }
    throw Error(ErrorCode::UnknownHandle, "handle " + std::to_string(handle) + " was never allocated");
  }
  const Bytes addr = live_it->second;
  live_.erase(live_it);
  retired_.insert(handle);

  auto seg_it = segment_of(addr);
  const Bytes base = seg_it->first;
  Segment& segment = seg_it->second;
  auto it = segment.blocks.find(addr - base);
  assert(it != segment.blocks.end() && it->second.allocated);
  it->second.allocated = false;
  allocated_ -= it->second.size;

  if (it != segment.blocks.begin()) {
    auto prev = std::prev(it);
    if (!prev->second.allocated) {
      free_pool_.erase(PoolKey{segment.stream, prev->second.size, base + prev->first});
      prev->second.size += it->second.size;
      segment.blocks.erase(it);
      it = prev;
    }
  }
  if (auto next = std::next(it); next != segment.blocks.end() && !next->second.allocated) {
    free_pool_.erase(PoolKey{segment.stream, next->second.size, base + next->first});
    it->second.size += next->second.size;
    segment.blocks.erase(next);
  }
  free_pool_.emplace(segment.stream, it->second.size, base + it->first);
}

std::optional<Bytes> CachingAllocator::block_size(Handle handle) const {
  const auto it = live_.find(handle);
  if (it == live_.end()) return std::nullopt;
  const auto seg = segment_of(it->second);
  return seg->second.blocks.at(it->second - seg->first).size;
}

std::vector<SegmentView> CachingAllocator::segments() const {
  std::vector<SegmentView> out;
  out.reserve(segments_.size());
  for (const auto& [base, segment] : segments_) {
    SegmentView view{base, segment.size, segment.stream, {}};
    for (const auto& [offset, block] : segment.blocks) {
      view.blocks.push_back({offset, block.size, block.allocated});
    }
    out.push_back(std::move(view));
  }
  return out;
}

std::optional<std::string> CachingAllocator::check_invariants() const {
  Bytes reserved = 0;
  Bytes allocated = 0;
  Bytes free_total = 0;
  std::size_t free_blocks = 0;
  std::size_t allocated_blocks = 0;
  for (const auto& [base, segment] : segments_) {
    const std::string where = "segment@" + std::to_string(base);
    Bytes expected_offset = 0;
    bool previous_free = false;
    for (const auto& [offset, block] : segment.blocks) {
      if (offset != expected_offset) return where + ": gap or overlap at offset " + std::to_string(offset);
      if (block.size == 0) return where + ": empty block";
      if (block.allocated) {
        if (block.size % cfg_.alignment != 0) return where + ": unaligned allocated block";
        allocated += block.size;
        ++allocated_blocks;
        previous_free = false;
      } else {
        if (previous_free) return where + ": adjacent free blocks";
        if (!free_pool_.contains(PoolKey{segment.stream, block.size, base + offset})) {
          return where + ": free block missing from pool";
        }
        free_total += block.size;
        ++free_blocks;
        previous_free = true;
      }
      expected_offset = offset + block.size;
    }
    if (expected_offset != segment.size) return where + ": blocks do not cover the segment";
    reserved += segment.size;
  }
  if (free_blocks != free_pool_.size()) return "pool holds stale entries";
  if (reserved != reserved_) return "reserved counter mismatch";
  if (allocated != allocated_) return "allocated counter mismatch";
  if (free_total + allocated != reserved_) return "conservation violated";
  if (allocated_blocks != live_.size()) return "live handle count mismatch";
  if (allocated_ > reserved_) return "allocated exceeds reserved";
  if (cfg_.device_capacity && reserved_ > *cfg_.device_capacity) return "reserved exceeds capacity";
  if (peak_reserved_ < reserved_ || peak_allocated_ < allocated_) return "peak below current";
  return std::nullopt;
}

}  // namespace peakmem
