// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force pairing of memory events, quadratic on purpose: each allocation
// ends at the next event touching the same address, whatever its sign.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "peakmem/trace.hpp"

namespace reference {

struct Pairing {
  std::size_t alloc_event_id;
  std::optional<std::size_t> free_event_id;
};

// `events` must already be in (start_ts, event_id) order.
inline std::vector<Pairing> pair_events(std::span<const peakmem::TraceEvent> events) {
  std::vector<Pairing> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (*events[i].bytes <= 0) continue;
    Pairing p{events[i].event_id, std::nullopt};
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      if (*events[j].addr == *events[i].addr) {
        p.free_event_id = events[j].event_id;
        break;
      }
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace reference
