// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/orchestrate.hpp"

#include <algorithm>
#include <unordered_set>

namespace peakmem {

namespace {

std::vector<const AnnotationMarker*> markers_of(std::span<const AnnotationMarker> markers,
                                                MarkerKind kind) {
  std::vector<const AnnotationMarker*> out;
  for (const auto& m : markers) {
    if (m.kind == kind) out.push_back(&m);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->start_ts < b->start_ts; });
  return out;
}

std::optional<std::size_t> window_of(std::span<const IterationWindow> windows, TimeNs t) {
  auto it = std::upper_bound(windows.begin(), windows.end(), t,
                             [](TimeNs value, const IterationWindow& w) { return value < w.start; });
  if (it == windows.begin()) return std::nullopt;
  --it;
  if (t >= it->end) return std::nullopt;
  return static_cast<std::size_t>(it - windows.begin());
}

bool inside(const AnnotationMarker& m, TimeNs t) { return t >= m.start_ts && t < m.end_ts; }

// Zero-grad, optimizer-step and gradient view of one trace iteration.
struct WindowContents {
  std::vector<const AnnotationMarker*> zero_grads;
  std::vector<const AnnotationMarker*> steps;
  std::vector<std::size_t> blocks;  // ids, allocation order
};

}  // namespace

std::vector<IterationWindow> iteration_windows(std::span<const AnnotationMarker> markers) {
  const auto steps = markers_of(markers, MarkerKind::ProfilerStep);
  if (steps.empty()) throw Error(ErrorCode::NoIterations, "trace has no profiler-step iterations");
  std::vector<IterationWindow> windows;
  windows.reserve(steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const TimeNs end = k + 1 < steps.size() ? steps[k + 1]->start_ts : steps[k]->end_ts;
    windows.push_back({steps[k]->start_ts, std::max(end, steps[k]->start_ts)});
  }
  return windows;
}

std::vector<std::size_t> identify_gradient_blocks(const TraceAnalysis& analysis,
                                                  std::span<const IterationWindow> windows) {
  std::unordered_set<std::size_t> backward;
  for (const auto& p : analysis.profiles.profiles) {
    backward.insert(p.backward_retained_blocks.begin(), p.backward_retained_blocks.end());
  }
  const auto steps = markers_of(analysis.markers, MarkerKind::OptimizerStep);

  std::vector<std::size_t> out;
  for (const auto& block : analysis.blocks) {
    if (!backward.contains(block.block_id)) continue;
    const auto w = window_of(windows, block.alloc_time);
    if (!w) continue;
    // A gradient must still be alive when the optimizer reads it.
    TimeNs cutoff = windows[*w].end;
    for (const auto* step : steps) {
      if (step->start_ts >= block.alloc_time && step->start_ts < windows[*w].end) {
        cutoff = step->start_ts;
        break;
      }
    }
    if (!block.free_time || *block.free_time >= cutoff) out.push_back(block.block_id);
  }
  return out;
}

std::vector<PlannedBlock> synthesize_model_load(std::span<const MemoryBlock> gradients_in_alloc_order,
                                                TimeNs head) {
  if (gradients_in_alloc_order.empty()) {
    throw Error(ErrorCode::NoGradientBlocks, "no gradient blocks found; is the backward pass in the trace?");
  }
  const auto n = static_cast<TimeNs>(gradients_in_alloc_order.size());
  std::vector<PlannedBlock> out;
  out.reserve(gradients_in_alloc_order.size());
  TimeNs ts = head - n;
  for (auto it = gradients_in_alloc_order.rbegin(); it != gradients_in_alloc_order.rend(); ++it) {
    out.push_back({it->size, ts++, std::nullopt, BlockRole::Model});
  }
  return out;
}

std::vector<PlannedBlock> synthesize_batch_blocks(std::span<const IterationWindow> windows,
                                                  std::span<const Bytes> batch_bytes) {
  if (windows.empty()) throw Error(ErrorCode::NoIterations, "no iterations to place batch data in");
  if (batch_bytes.empty()) throw Error(ErrorCode::MissingBatchBytes, "sidecar lists no batch tensor sizes");
  std::vector<PlannedBlock> out;
  out.reserve(windows.size() * batch_bytes.size());
  for (const auto& w : windows) {
    for (Bytes size : batch_bytes) out.push_back({size, w.start, w.end, BlockRole::Batch});
  }
  return out;
}

void adjust_gradient_lifetimes(std::span<PlannedBlock> gradients,
                               std::span<const TimeNs> zero_grad_starts) {
  for (auto& g : gradients) {
    const auto it = std::upper_bound(zero_grad_starts.begin(), zero_grad_starts.end(), g.alloc_ts);
    g.free_ts = it == zero_grad_starts.end() ? std::nullopt : std::optional<TimeNs>(*it);
  }
}

std::vector<std::size_t> extract_optimizer_state(std::span<const MemoryBlock> blocks,
                                                 const AnnotationMarker& step,
                                                 std::span<const Bytes> param_sizes) {
  std::vector<std::size_t> out;
  for (const auto& b : blocks) {
    if (!inside(step, b.alloc_time)) continue;
    if (std::find(param_sizes.begin(), param_sizes.end(), b.size) == param_sizes.end()) continue;
    // Scratch tensors of parameter size come and go within the step.
    if (b.free_time && *b.free_time < step.end_ts) continue;
    out.push_back(b.block_id);
  }
  return out;
}

RequestSequence build_sequence(const TraceAnalysis& analysis, const Sidecar& sidecar,
                               const OrchestrationOptions& options) {
  if (options.iterations == 0) throw Error(ErrorCode::NoIterations, "iteration count must be positive");
  const auto windows = iteration_windows(analysis.markers);
  if (sidecar.batch_bytes.empty()) {
    throw Error(ErrorCode::MissingBatchBytes, "sidecar lists no batch tensor sizes");
  }
  const std::size_t trace_iters = windows.size();
  const std::size_t out_iters = options.iterations;

  std::vector<WindowContents> contents(trace_iters);
  for (const auto* m : markers_of(analysis.markers, MarkerKind::ZeroGrad)) {
    if (const auto w = window_of(windows, m->start_ts)) contents[*w].zero_grads.push_back(m);
  }
  for (const auto* m : markers_of(analysis.markers, MarkerKind::OptimizerStep)) {
    if (const auto w = window_of(windows, m->start_ts)) contents[*w].steps.push_back(m);
  }
  std::size_t outside = 0;
  for (const auto& b : analysis.blocks) {
    if (const auto w = window_of(windows, b.alloc_time)) {
      contents[*w].blocks.push_back(b.block_id);
    } else {
      ++outside;
    }
  }

  std::vector<bool> is_gradient(analysis.blocks.size(), false);
  std::vector<MemoryBlock> first_gradients;
  for (std::size_t id : identify_gradient_blocks(analysis, windows)) {
    is_gradient[id] = true;
    if (window_of(windows, analysis.blocks[id].alloc_time) == 0u) {
      first_gradients.push_back(analysis.blocks[id]);
    }
  }

  // Timeline placement of each output iteration.
  const IterationWindow& last = windows.back();
  const TimeNs last_duration = last.end - last.start;
  std::vector<IterationWindow> placed(out_iters);
  std::vector<TimeNs> shift(out_iters);
  std::vector<std::size_t> source(out_iters);
  for (std::size_t m = 0; m < out_iters; ++m) {
    source[m] = std::min(m, trace_iters - 1);
    if (m < trace_iters) {
      placed[m] = windows[m];
      shift[m] = 0;
    } else {
      const TimeNs start = last.end + static_cast<TimeNs>(m - trace_iters) * last_duration;
      placed[m] = {start, start + last_duration};
      shift[m] = start - last.start;
    }
  }

  std::vector<TimeNs> zero_grads;
  for (std::size_t m = 0; m < out_iters; ++m) {
    for (const auto* z : contents[source[m]].zero_grads) zero_grads.push_back(z->start_ts + shift[m]);
  }
  std::sort(zero_grads.begin(), zero_grads.end());

  std::unordered_set<std::size_t> state;
  for (const auto* step : contents[0].steps) {
    for (std::size_t id : extract_optimizer_state(analysis.blocks, *step, sidecar.param_sizes)) {
      state.insert(id);
    }
  }

  RequestSequence seq;
  struct Pending {
    MemoryRequest request;
    std::size_t ordinal;
  };
  std::vector<Pending> pending;
  auto emit = [&](RequestKind kind, std::size_t block, Bytes size, TimeNs ts) {
    pending.push_back({MemoryRequest{0, kind, block, size, ts, 0}, pending.size()});
  };
  std::size_t next_block = 0;
  auto emit_block = [&](const PlannedBlock& b) {
    const std::size_t id = next_block++;
    seq.phase_tags[id] = b.role;
    emit(RequestKind::Alloc, id, b.size, b.alloc_ts);
    if (b.free_ts) emit(RequestKind::Free, id, b.size, *b.free_ts);
  };

  for (const auto& b : synthesize_model_load(first_gradients, placed[0].start)) emit_block(b);

  const auto batches = synthesize_batch_blocks(placed, sidecar.batch_bytes);
  const std::size_t per_iter = sidecar.batch_bytes.size();
  for (std::size_t m = 0; m < out_iters; ++m) {
    const WindowContents& src = contents[source[m]];
    std::vector<std::size_t> batch_ids;
    for (std::size_t j = 0; j < per_iter; ++j) {
      const PlannedBlock& b = batches[m * per_iter + j];
      batch_ids.push_back(next_block);
      seq.phase_tags[next_block] = b.role;
      emit(RequestKind::Alloc, next_block++, b.size, b.alloc_ts);
    }

    for (std::size_t id : src.blocks) {
      const MemoryBlock& b = analysis.blocks[id];
      const bool in_step = std::any_of(src.steps.begin(), src.steps.end(),
                                       [&](const auto* s) { return inside(*s, b.alloc_time); });
      PlannedBlock planned{b.size, b.alloc_time + shift[m], std::nullopt, b.role};
      if (in_step) {
        if (m != 0 || !state.contains(id)) continue;
        planned.role = BlockRole::OptimizerState;
      } else if (is_gradient[id]) {
        planned.role = BlockRole::Gradient;
        adjust_gradient_lifetimes(std::span(&planned, 1), zero_grads);
      } else if (b.role == BlockRole::Temporary) {
        continue;
      } else if (b.free_time) {
        planned.free_ts = *b.free_time + shift[m];
      }
      emit_block(planned);
    }

    for (std::size_t j = 0; j < per_iter; ++j) {
      const PlannedBlock& b = batches[m * per_iter + j];
      emit(RequestKind::Free, batch_ids[j], b.size, *b.free_ts);
    }
  }

  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.request.virtual_ts < b.request.virtual_ts;
  });
  seq.requests.reserve(pending.size());
  for (auto& p : pending) {
    p.request.seq_no = seq.requests.size();
    seq.requests.push_back(p.request);
  }
  for (const auto& w : placed) seq.iteration_boundaries.push_back(w.start);
  seq.iteration_boundaries.push_back(placed.back().end);

  if (outside > 0) {
    seq.warnings.push_back(std::to_string(outside) + " block(s) allocated outside every iteration were dropped");
  }
  auto sorted_sizes = [](std::vector<Bytes> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  std::vector<Bytes> gradient_sizes;
  for (const auto& g : first_gradients) gradient_sizes.push_back(g.size);
  if (!sidecar.param_sizes.empty() && sorted_sizes(gradient_sizes) != sorted_sizes(sidecar.param_sizes)) {
    seq.warnings.push_back("gradient block sizes differ from the sidecar parameter sizes");
  }
  return seq;
}

}  // namespace peakmem
