// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Turns the blocks seen on the CPU into the request stream a GPU run would
// issue: model parameters loaded up front, batch tensors per iteration,
// gradients held until the next zero_grad, optimizer state created once, and
// intra-operator temporaries removed.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "peakmem/link.hpp"
#include "peakmem/sequence.hpp"

namespace peakmem {

// Iteration k covers [start of step k, start of step k+1); the last one ends
// with its own step annotation.
struct IterationWindow {
  TimeNs start = 0;
  TimeNs end = 0;
};

// Throws NoIterations when there is no profiler-step marker.
std::vector<IterationWindow> iteration_windows(std::span<const AnnotationMarker> markers);

// A block to be emitted; no free_ts means it lives to the end of the sequence.
struct PlannedBlock {
  Bytes size = 0;
  TimeNs alloc_ts = 0;
  std::optional<TimeNs> free_ts;
  BlockRole role = BlockRole::Unclassified;
};

// Blocks retained by backward operators that are still live when the iteration
// hands over to the optimizer (or ends). Returns block ids in allocation order.
std::vector<std::size_t> identify_gradient_blocks(const TraceAnalysis& analysis,
                                                  std::span<const IterationWindow> windows);

// One permanent block per gradient, in reverse allocation order, at strictly
// increasing timestamps ending just before `head`. Throws NoGradientBlocks.
std::vector<PlannedBlock> synthesize_model_load(std::span<const MemoryBlock> gradients_in_alloc_order,
                                                TimeNs head);

// Per window, one block per batch tensor spanning the whole window.
// Throws NoIterations or MissingBatchBytes.
std::vector<PlannedBlock> synthesize_batch_blocks(std::span<const IterationWindow> windows,
                                                  std::span<const Bytes> batch_bytes);

// Moves each free to the first zero_grad start strictly after the allocation;
// with none left the block becomes permanent. `zero_grad_starts` is sorted.
void adjust_gradient_lifetimes(std::span<PlannedBlock> gradients,
                               std::span<const TimeNs> zero_grad_starts);

// Blocks allocated inside the step whose size matches a parameter and that
// outlive the step. Returns block ids.
std::vector<std::size_t> extract_optimizer_state(std::span<const MemoryBlock> blocks,
                                                 const AnnotationMarker& step,
                                                 std::span<const Bytes> param_sizes);

struct OrchestrationOptions {
  std::size_t iterations = 2;
};

// Iteration m replays trace iteration min(m, T-1); iterations beyond the trace
// are clones shifted by the last iteration's duration. Optimizer state is only
// created in the first iteration. Throws NoIterations, NoGradientBlocks,
// MissingBatchBytes.
RequestSequence build_sequence(const TraceAnalysis& analysis, const Sidecar& sidecar,
                               const OrchestrationOptions& options = {});

}  // namespace peakmem
