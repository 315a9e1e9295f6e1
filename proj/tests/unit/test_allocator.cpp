// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"
#include "expect_error.hpp"
#include "fixtures.hpp"
#include "peakmem/allocator.hpp"
#include "peakmem/selftest.hpp"
#include "peakmem/simulator.hpp"
#include "reference_allocator.hpp"

using namespace peakmem;
using testing_support::error_code;

namespace {

void expect_valid(const CachingAllocator& a) {
  const auto violation = a.check_invariants();
  CHECK_MESSAGE(!violation, violation.value_or(""));
}

std::vector<MemoryRequest> requests(std::initializer_list<std::tuple<RequestKind, std::size_t, Bytes>> list) {
  std::vector<MemoryRequest> out;
  for (const auto& [kind, block, size] : list) {
    out.push_back({out.size(), kind, block, size, static_cast<TimeNs>(out.size()), 0});
  }
  return out;
}

constexpr auto A = RequestKind::Alloc;
constexpr auto F = RequestKind::Free;

std::vector<reference::Point> library_timeline(const SimulationResult& r) {
  std::vector<reference::Point> out;
  for (const auto& p : r.timeline) out.push_back({p.seq_no, p.reserved, p.allocated});
  return out;
}

}  // namespace

TEST_CASE("round_request rounds up to 512") {
  CHECK(round_request(1) == 512);
  CHECK(round_request(512) == 512);
  CHECK(round_request(513) == 1024);
  CHECK(error_code([] { round_request(0); }) == ErrorCode::ZeroSize);
}

TEST_CASE("segment sizes") {
  CHECK(segment_size_for(1 * kMiB) == 2 * kMiB);
  CHECK(segment_size_for(10 * kMiB) == 20 * kMiB);
  CHECK(segment_size_for(11 * kMiB) == 12 * kMiB);
  CHECK(segment_size_for(10 * kMiB + 1) == 12 * kMiB);
}

TEST_CASE("config validation") {
  AllocatorConfig cfg;
  cfg.alignment = 500;
  CHECK(error_code([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
  cfg = {};
  cfg.max_split_size = 0;
  CHECK(error_code([&] { CachingAllocator{cfg}; }) == ErrorCode::InvalidArgument);
}

TEST_CASE("first allocation reserves a small segment and splits it") {
  CachingAllocator a({});
  a.allocate(1, 512);
  CHECK(a.reserved_bytes() == 2 * kMiB);
  CHECK(a.allocated_bytes() == 512);
  const auto segs = a.segments();
  REQUIRE(segs.size() == 1);
  REQUIRE(segs[0].blocks.size() == 2);
  CHECK(segs[0].blocks[0].offset == 0);
  CHECK(segs[0].blocks[0].size == 512);
  CHECK(segs[0].blocks[0].allocated);
  CHECK(segs[0].blocks[1].size == 2 * kMiB - 512);
  CHECK_FALSE(segs[0].blocks[1].allocated);

  a.allocate(2, 512);
  CHECK(a.reserved_bytes() == 2 * kMiB);
  CHECK(a.segments()[0].blocks[1].offset == 512);
  expect_valid(a);
}

TEST_CASE("segment larger than capacity is out of memory") {
  AllocatorConfig cfg;
  cfg.device_capacity = 3 * kMiB;
  CachingAllocator a(cfg);
  CHECK(error_code([&] { a.allocate(1, 3 * kMiB / 2); }) == ErrorCode::OutOfMemory);
  CHECK(a.reserved_bytes() == 0);
}

TEST_CASE("free coalesces with both neighbours") {
  CachingAllocator a({});
  a.allocate(1, 512);
  SUBCASE("single merge") {
    a.free(1);
    const auto segs = a.segments();
    REQUIRE(segs[0].blocks.size() == 1);
    CHECK(segs[0].blocks[0].size == 2 * kMiB);
  }
  SUBCASE("two-sided merge") {
    a.allocate(2, 512);
    a.allocate(3, 512);
    a.allocate(4, 512);  // keeps block 3 from touching the tail
    a.free(1);
    a.free(3);
    CHECK(a.segments()[0].blocks.size() == 5);
    a.free(2);
    const auto segs = a.segments();
    REQUIRE(segs[0].blocks.size() == 3);
    CHECK(segs[0].blocks[0].size == 1536);
    CHECK_FALSE(segs[0].blocks[0].allocated);
  }
  expect_valid(a);
}

TEST_CASE("handle errors") {
  CachingAllocator a({});
  a.allocate(1, 100);
  CHECK(error_code([&] { a.free(99); }) == ErrorCode::UnknownHandle);
  CHECK(error_code([&] { a.allocate(1, 100); }) == ErrorCode::DuplicateHandle);
  a.free(1);
  CHECK(error_code([&] { a.free(1); }) == ErrorCode::DoubleFree);
  CHECK(error_code([&] { a.allocate(1, 100); }) == ErrorCode::DuplicateHandle);
  CHECK(error_code([&] { a.allocate(2, 0); }) == ErrorCode::ZeroSize);
}

TEST_CASE("best fit prefers the smallest block, then the lowest address") {
  CachingAllocator a({});
  // Two 2 MiB segments with free holes of 4 KiB (segment 0) and 2 KiB (segment 1).
  a.allocate(1, 4096);
  a.allocate(2, 2 * kMiB - 4096);
  a.allocate(3, 2048);
  a.allocate(4, 2 * kMiB - 2048);
  a.free(1);
  a.free(3);
  a.allocate(5, 1024);
  const auto segs = a.segments();
  CHECK(segs[1].blocks[0].allocated);
  CHECK(segs[1].blocks[0].size == 1024);
  CHECK_FALSE(segs[0].blocks[0].allocated);
  expect_valid(a);
}

TEST_CASE("streams do not share cached blocks") {
  CachingAllocator a({});
  a.allocate(1, 512, 0);
  a.allocate(2, 512, 1);
  CHECK(a.segment_count() == 2);
  CHECK(a.reserved_bytes() == 4 * kMiB);
}

TEST_CASE("oversize blocks are never split") {
  AllocatorConfig cfg;
  cfg.max_split_size = 8 * kMiB;
  CachingAllocator a(cfg);
  a.allocate(1, 12 * kMiB);  // 12 MiB segment, oversize
  a.free(1);
  SUBCASE("close fit takes the whole block") {
    a.allocate(2, 6 * kMiB);  // remainder 6 MiB < 8 MiB
    CHECK(a.block_size(2) == 12 * kMiB);
    CHECK(a.segment_count() == 1);
  }
  SUBCASE("loose fit reserves a new segment") {
    a.allocate(2, 3 * kMiB);  // remainder 9 MiB >= 8 MiB
    // The fresh 20 MiB segment is itself oversize, so it is handed out whole.
    CHECK(a.block_size(2) == 20 * kMiB);
    CHECK(a.segment_count() == 2);
    CHECK(a.reserved_bytes() == 32 * kMiB);
  }
  expect_valid(a);
}

TEST_CASE("unbounded split size splits everything") {
  CachingAllocator a({});
  a.allocate(1, 64 * kMiB);
  a.free(1);
  a.allocate(2, 512);
  CHECK(a.block_size(2) == 512);
  CHECK(a.segment_count() == 1);
}

TEST_CASE("exhaustion releases oversize segments first, largest first") {
  AllocatorConfig cfg;
  cfg.max_split_size = 4 * kMiB;
  cfg.device_capacity = 60 * kMiB;
  CachingAllocator a(cfg);
  a.allocate(1, 24 * kMiB);  // 24 MiB segment
  a.allocate(2, 512);        // 2 MiB segment
  a.allocate(3, 30 * kMiB);  // 30 MiB segment; reserved 56 MiB
  a.free(1);
  a.free(3);
  a.free(2);
  a.allocate(4, 3 * kMiB);  // needs 20 MiB: dropping the 30 MiB segment is enough
  CHECK(a.segments_released() == 1);
  CHECK(a.reserved_bytes() == 46 * kMiB);
  std::vector<Bytes> sizes;
  for (const auto& s : a.segments()) sizes.push_back(s.size);
  CHECK(sizes == std::vector<Bytes>{24 * kMiB, 2 * kMiB, 20 * kMiB});
  expect_valid(a);
}

TEST_CASE("exhaustion falls back to releasing every idle segment") {
  AllocatorConfig cfg;
  cfg.device_capacity = 24 * kMiB;
  CachingAllocator a(cfg);
  a.allocate(1, 512);
  a.allocate(2, 2 * kMiB);  // 20 MiB segment; reserved 22 MiB
  a.free(1);
  a.free(2);
  a.allocate(3, 21 * kMiB);  // needs a 22 MiB segment
  CHECK(a.segments_released() == 2);
  CHECK(a.reserved_bytes() == 22 * kMiB);
  expect_valid(a);
}

TEST_CASE("replay examples") {
  SUBCASE("alloc then free") {
    const auto r = replay(requests({{A, 0, 512}, {F, 0, 0}}), {});
    CHECK(r.peak_reserved == 2 * kMiB);
    CHECK(r.peak_allocated == 512);
    CHECK(r.timeline.size() == 2);
  }
  SUBCASE("empty") {
    const auto r = replay({}, {});
    CHECK(r.peak_reserved == 0);
    CHECK(r.peak_allocated == 0);
  }
  SUBCASE("out of memory stops the replay") {
    AllocatorConfig cfg;
    cfg.device_capacity = 4 * kMiB;
    const auto r = replay(requests({{A, 0, 512}, {A, 1, 5 * kMiB}, {F, 0, 0}}), cfg);
    CHECK(r.oom_seq_no == 1u);
    CHECK(r.timeline.size() == 1);
    CHECK(r.peak_reserved == 2 * kMiB);
  }
}

TEST_CASE("replay rejects malformed sequences") {
  CHECK(error_code([] { replay(requests({{F, 0, 0}}), {}); }) == ErrorCode::MalformedSequence);
  CHECK(error_code([] { replay(requests({{A, 0, 1}, {A, 0, 1}}), {}); }) == ErrorCode::MalformedSequence);
  CHECK(error_code([] { replay(requests({{A, 0, 1}, {F, 0, 0}, {F, 0, 0}}), {}); }) ==
        ErrorCode::MalformedSequence);
  auto unsorted = requests({{A, 0, 1}, {A, 1, 1}});
  unsorted[1].seq_no = 0;
  CHECK(error_code([&] { replay(unsorted, {}); }) == ErrorCode::MalformedSequence);
}

TEST_CASE("interleave fixture matches the reference allocator") {
  const auto seq = parse_sequence_text(read_file(testing_support::fixture_path("seq_interleave.json")));
  for (Bytes max_split : {Bytes{0}, 4 * kMiB}) {
    CAPTURE(max_split);
    AllocatorConfig cfg;
    if (max_split) cfg.max_split_size = max_split;
    const auto lib = replay(seq.requests, cfg, {.record_timeline = true, .check_invariants = true});
    const auto ref = reference::run(seq.requests, {max_split, 0});
    CHECK(library_timeline(lib) == ref.timeline);
    CHECK(lib.peak_reserved == ref.peak_reserved);
  }
}

TEST_CASE("random sequences match the reference allocator") {
  std::mt19937_64 rng(20261018);
  for (int i = 0; i < 150; ++i) {
    const auto seq = random_sequence(rng);
    reference::Config rc;
    AllocatorConfig cfg;
    if (i % 3 == 1) cfg.max_split_size = rc.max_split = (1 + rng() % 16) * kMiB;
    if (i % 2 == 1) cfg.device_capacity = rc.capacity = (40 + rng() % 400) * kMiB;
    const auto lib = replay(seq, cfg, {.record_timeline = true, .check_invariants = true});
    const auto ref = reference::run(seq, rc);
    REQUIRE(library_timeline(lib) == ref.timeline);
    REQUIRE(lib.oom_seq_no == ref.oom_seq_no);
  }
}

TEST_CASE("replay is deterministic") {
  std::mt19937_64 rng(7);
  const auto seq = random_sequence(rng);
  CHECK(replay(seq, {}).timeline == replay(seq, {}).timeline);
}

TEST_CASE("more capacity does not change a run that never released a segment") {
  std::mt19937_64 rng(11);
  int compared = 0;
  for (int i = 0; i < 100; ++i) {
    const auto seq = random_sequence(rng);
    AllocatorConfig cfg;
    cfg.device_capacity = (64 + rng() % 256) * kMiB;
    const auto small = replay(seq, cfg);
    if (small.oom_seq_no || small.segments_released > 0) continue;
    ++compared;
    for (Bytes extra : {Bytes{1}, 512 * kMiB}) {
      AllocatorConfig bigger = cfg;
      *bigger.device_capacity += extra;
      CHECK(replay(seq, bigger).timeline == small.timeline);
    }
  }
  CHECK(compared > 10);
}

TEST_CASE("sequence JSON round trip") {
  std::mt19937_64 rng(3);
  RequestSequence seq;
  seq.requests = random_sequence(rng);
  seq.phase_tags[0] = BlockRole::Gradient;
  const auto back = parse_sequence_text(serialize_sequence(seq));
  CHECK(back.requests == seq.requests);
  CHECK(back.phase_tags == seq.phase_tags);
  CHECK(error_code([] { parse_sequence_text("{}"); }) == ErrorCode::MalformedSequence);
  CHECK(error_code([] { parse_sequence_text(R"([{"seq_no":0,"kind":"grow","block_id":0}])"); }) ==
        ErrorCode::MalformedSequence);
  CHECK(error_code([] { parse_sequence_text(R"([{"seq_no":0,"kind":"alloc","block_id":0}])"); }) ==
        ErrorCode::MalformedSequence);
}
