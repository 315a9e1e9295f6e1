// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Structural checks on a sequence built from a fixture. Each returns a list of
// human-readable problems; empty means the check holds.

#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "peakmem/orchestrate.hpp"

namespace testing_support {

inline std::vector<std::string> orchestration_problems(const std::string& name) {
  using namespace peakmem;
  std::vector<std::string> problems;
  auto fail = [&](const std::string& what) { problems.push_back(name + ": " + what); };

  const auto f = load_fixture(name);
  const auto seq = build_sequence(f.analysis, f.sidecar);
  const auto& b = seq.iteration_boundaries;
  if (b.size() != 3) {
    fail("expected two iterations");
    return problems;
  }
  auto role = [&](std::size_t id) { return seq.phase_tags.at(id); };
  auto slot = [&](TimeNs ts) {
    return static_cast<std::size_t>(std::upper_bound(b.begin(), b.end() - 1, ts) - b.begin());
  };

  std::vector<std::multiset<Bytes>> sizes(3);
  Bytes model = 0, first_gradients = 0;
  std::vector<Bytes> state(3, 0);
  const std::set<Bytes> params(f.sidecar.param_sizes.begin(), f.sidecar.param_sizes.end());
  for (const auto& r : seq.requests) {
    if (r.kind != RequestKind::Alloc) continue;
    const std::size_t s = slot(r.virtual_ts);
    sizes[s].insert(r.size);
    switch (role(r.block_id)) {
      case BlockRole::Model: model += r.size; break;
      case BlockRole::Gradient:
        if (s == 1) first_gradients += r.size;
        break;
      case BlockRole::OptimizerState:
        state[s] += r.size;
        if (!params.contains(r.size)) fail("optimizer state of " + std::to_string(r.size) + " bytes");
        break;
      default: break;
    }
  }
  if (model != first_gradients) fail("model load differs from first-iteration gradients");

  if (f.sidecar.optimizer == "adam") {
    if (state[1] == 0) fail("first iteration has no optimizer state");
    if (state[2] != 0) fail("second iteration allocates optimizer state");
  } else if (sizes[1] != sizes[2]) {
    fail("iteration request sizes differ");
  }

  // Zero-grad calls as placed on the output timeline.
  const auto windows = iteration_windows(f.analysis.markers);
  std::set<TimeNs> zero_grads;
  for (std::size_t m = 0; m + 1 < b.size(); ++m) {
    const auto& w = windows[std::min(m, windows.size() - 1)];
    for (const auto& mk : f.analysis.markers) {
      if (mk.kind == MarkerKind::ZeroGrad && mk.start_ts >= w.start && mk.start_ts < w.end) {
        zero_grads.insert(mk.start_ts + (b[m] - w.start));
      }
    }
  }
  for (const auto& r : seq.requests) {
    if (r.kind == RequestKind::Free && role(r.block_id) == BlockRole::Gradient && !zero_grads.contains(r.virtual_ts)) {
      fail("gradient freed outside zero_grad at " + std::to_string(r.virtual_ts));
    }
  }
  return problems;
}

}  // namespace testing_support
