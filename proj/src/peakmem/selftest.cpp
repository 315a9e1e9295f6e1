// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/selftest.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "peakmem/simulator.hpp"

namespace peakmem {

std::vector<MemoryRequest> random_sequence(std::mt19937_64& rng, const RandomSequenceOptions& options) {
  std::uniform_int_distribution<std::size_t> length(1, std::max<std::size_t>(1, options.max_requests));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_max = std::log(static_cast<double>(options.max_size));

  const std::size_t n = length(rng);
  std::vector<MemoryRequest> out;
  std::vector<std::size_t> live;
  std::size_t next_block = 0;
  while (out.size() < n) {
    const bool do_free = !live.empty() && unit(rng) < options.free_probability;
    if (do_free) {
      std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
      const std::size_t i = pick(rng);
      out.push_back({out.size(), RequestKind::Free, live[i], 0, static_cast<TimeNs>(out.size()), 0});
      live[i] = live.back();
      live.pop_back();
    } else {
      auto size = static_cast<Bytes>(std::exp(unit(rng) * log_max));
      size = std::clamp<Bytes>(size, 1, options.max_size);
      out.push_back({out.size(), RequestKind::Alloc, next_block, size, static_cast<TimeNs>(out.size()), 0});
      live.push_back(next_block++);
    }
  }
  return out;
}

SelftestSummary run_selftest(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  SelftestSummary summary;
  auto fail = [&](std::size_t index, const std::string& what) {
    summary.failures.push_back("sequence " + std::to_string(index) + ": " + what);
  };

  for (std::size_t i = 0; i < count; ++i) {
    const auto requests = random_sequence(rng);
    ++summary.sequences;
    summary.requests += requests.size();

    AllocatorConfig cfg;
    if (rng() % 2 == 0) cfg.max_split_size = (1 + rng() % 32) * kMiB;
    if (rng() % 2 == 0) cfg.device_capacity = (32 + rng() % 512) * kMiB;

    try {
      const auto first = replay(requests, cfg, {.record_timeline = true, .check_invariants = true});
      const auto second = replay(requests, cfg);
      if (first.timeline != second.timeline || first.oom_seq_no != second.oom_seq_no) {
        fail(i, "replay is not deterministic");
      }
      if (first.oom_seq_no) ++summary.ooms;

      RequestSequence seq;
      seq.requests = requests;
      if (parse_sequence_text(serialize_sequence(seq)).requests != requests) {
        fail(i, "sequence does not survive a JSON round trip");
      }

      if (cfg.device_capacity && !first.oom_seq_no && first.segments_released == 0) {
        AllocatorConfig larger = cfg;
        *larger.device_capacity *= 2;
        if (replay(requests, larger).timeline != first.timeline) {
          fail(i, "more capacity changed a run that never released a segment");
        }
      }
    } catch (const Error& e) {
      fail(i, e.what());
    }
  }
  return summary;
}

std::string serialize_selftest(const SelftestSummary& summary) {
  const nlohmann::json doc = {{"sequences", summary.sequences},
                              {"requests", summary.requests},
                              {"ooms", summary.ooms},
                              {"failures", summary.failures},
                              {"ok", summary.ok()}};
  return doc.dump(2) + "\n";
}

}  // namespace peakmem
