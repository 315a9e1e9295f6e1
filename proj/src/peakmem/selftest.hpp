// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "peakmem/sequence.hpp"

namespace peakmem {

struct RandomSequenceOptions {
  std::size_t max_requests = 200;
  Bytes max_size = 64 * kMiB;
  double free_probability = 0.45;
};

// Well-formed random sequence: sizes spread log-uniformly over [1, max_size],
// frees pick a random live block, and some blocks are left live at the end.
std::vector<MemoryRequest> random_sequence(std::mt19937_64& rng, const RandomSequenceOptions& options = {});

struct SelftestSummary {
  std::size_t sequences = 0;
  std::size_t requests = 0;
  std::size_t ooms = 0;
  std::vector<std::string> failures;

  bool ok() const noexcept { return failures.empty(); }
};

// Replays random sequences under varied configurations and checks allocator
// invariants, replay determinism, sequence round-tripping, and capacity
// monotonicity for runs that never released a segment.
SelftestSummary run_selftest(std::uint64_t seed, std::size_t count);

std::string serialize_selftest(const SelftestSummary& summary);

}  // namespace peakmem
