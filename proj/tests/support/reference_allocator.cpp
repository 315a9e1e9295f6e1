// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "reference_allocator.hpp"

#include <algorithm>
#include <stdexcept>

namespace reference {

namespace {

constexpr std::uint64_t MiB = 1024 * 1024;

struct Seg {
  std::uint64_t base;
  std::uint64_t size;
  int stream;
};

struct Blk {
  std::uint64_t addr;
  std::uint64_t size;
  bool used;
  std::uint64_t handle;
  int stream;
  std::uint64_t seg_base;
};

std::uint64_t round_up(std::uint64_t s) {
  const std::uint64_t rem = s % 512;
  return rem == 0 ? s : s + (512 - rem);
}

std::uint64_t segment_for(std::uint64_t r) {
  if (r <= 1 * MiB) return 2 * MiB;
  if (r <= 10 * MiB) return 20 * MiB;
  std::uint64_t s = 0;
  while (s < r) s += 2 * MiB;
  return s;
}

class Naive {
 public:
  explicit Naive(Config c) : c_(c) {}

  bool alloc(std::uint64_t handle, std::uint64_t size, int stream) {
    const std::uint64_t r = round_up(size);
    auto usable = [&](const Blk& b) {
      if (b.used || b.stream != stream || b.size < r) return false;
      if (c_.max_split != 0 && b.size > c_.max_split) return b.size - r < c_.max_split;
      return true;
    };
    int best = -1;
    for (int i = 0; i < static_cast<int>(blocks_.size()); ++i) {
      if (!usable(blocks_[i])) continue;
      if (best < 0 || blocks_[i].size < blocks_[best].size ||
          (blocks_[i].size == blocks_[best].size && blocks_[i].addr < blocks_[best].addr)) {
        best = i;
      }
    }
    if (best < 0) {
      const std::uint64_t seg = segment_for(r);
      if (!fits(seg)) release_for(seg);
      if (!fits(seg)) return false;
      segs_.push_back({next_base_, seg, stream});
      blocks_.push_back({next_base_, seg, false, 0, stream, next_base_});
      next_base_ += seg;
      best = static_cast<int>(blocks_.size()) - 1;
    }
    Blk& b = blocks_[best];
    const bool oversize = c_.max_split != 0 && b.size > c_.max_split;
    if (!oversize && b.size > r) {
      Blk rest{b.addr + r, b.size - r, false, 0, b.stream, b.seg_base};
      b.size = r;
      blocks_.push_back(rest);
    }
    Blk& taken = blocks_[best];
    taken.used = true;
    taken.handle = handle;
    return true;
  }

  void release(std::uint64_t handle) {
    auto it = std::find_if(blocks_.begin(), blocks_.end(),
                           [&](const Blk& b) { return b.used && b.handle == handle; });
    if (it == blocks_.end()) throw std::logic_error("reference: unknown handle");
    it->used = false;
    Blk merged = *it;
    blocks_.erase(it);
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto j = blocks_.begin(); j != blocks_.end(); ++j) {
        if (j->used || j->seg_base != merged.seg_base) continue;
        if (j->addr + j->size == merged.addr) {
          merged.addr = j->addr;
          merged.size += j->size;
        } else if (merged.addr + merged.size == j->addr) {
          merged.size += j->size;
        } else {
          continue;
        }
        blocks_.erase(j);
        changed = true;
        break;
      }
    }
    blocks_.push_back(merged);
  }

  std::uint64_t reserved() const {
    std::uint64_t t = 0;
    for (const auto& s : segs_) t += s.size;
    return t;
  }

  std::uint64_t allocated() const {
    std::uint64_t t = 0;
    for (const auto& b : blocks_) {
      if (b.used) t += b.size;
    }
    return t;
  }

 private:
  bool fits(std::uint64_t seg) const { return c_.capacity == 0 || reserved() + seg <= c_.capacity; }

  bool whole_free(const Seg& s) const {
    int count = 0;
    bool any_used = false;
    for (const auto& b : blocks_) {
      if (b.seg_base == s.base) {
        ++count;
        any_used = any_used || b.used;
      }
    }
    return count == 1 && !any_used;
  }

  void drop(std::uint64_t base) {
    segs_.erase(std::find_if(segs_.begin(), segs_.end(), [&](const Seg& s) { return s.base == base; }));
    blocks_.erase(std::find_if(blocks_.begin(), blocks_.end(), [&](const Blk& b) { return b.seg_base == base; }));
  }

  void release_for(std::uint64_t seg) {
    if (c_.max_split != 0) {
      while (!fits(seg)) {
        const Seg* pick = nullptr;
        for (const auto& s : segs_) {
          if (s.size <= c_.max_split || !whole_free(s)) continue;
          if (pick == nullptr || s.size > pick->size || (s.size == pick->size && s.base < pick->base)) pick = &s;
        }
        if (pick == nullptr) break;
        drop(pick->base);
      }
      if (fits(seg)) return;
    }
    std::vector<std::uint64_t> idle;
    for (const auto& s : segs_) {
      if (whole_free(s)) idle.push_back(s.base);
    }
    for (auto base : idle) drop(base);
  }

  Config c_;
  std::vector<Seg> segs_;
  std::vector<Blk> blocks_;
  std::uint64_t next_base_ = 0;
};

}  // namespace

Result run(const std::vector<peakmem::MemoryRequest>& requests, const Config& config) {
  Naive a(config);
  Result out;
  for (const auto& r : requests) {
    if (r.kind == peakmem::RequestKind::Alloc) {
      if (!a.alloc(r.block_id, r.size, r.stream)) {
        out.oom_seq_no = r.seq_no;
        break;
      }
    } else {
      a.release(r.block_id);
    }
    const Point p{r.seq_no, a.reserved(), a.allocated()};
    out.peak_reserved = std::max(out.peak_reserved, p.reserved);
    out.peak_allocated = std::max(out.peak_allocated, p.allocated);
    out.timeline.push_back(p);
  }
  return out;
}

}  // namespace reference
