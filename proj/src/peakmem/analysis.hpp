// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Structural views over a parsed trace: the layer tree (python_function),
// top-level operators (cpu_op), iteration markers (user_annotation) and
// memory-block lifetimes (cpu_instant_event).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakmem/common.hpp"
#include "peakmem/trace.hpp"

namespace peakmem {

struct LayerNode {
  std::string name;        // raw frame name, e.g. "nn.Module: Linear_0"
  std::string class_name;  // "Linear"
  TimeNs start_ts = 0;
  TimeNs end_ts = 0;
  std::size_t event_id = 0;
  bool is_wrapper = false;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;  // indices into LayerTree::nodes, time-ordered
  std::size_t depth = 0;
};

// Flat storage; nodes[0] is the synthetic root spanning the whole trace.
struct LayerTree {
  std::vector<LayerNode> nodes;

  static constexpr std::size_t kRoot = 0;
  const LayerNode& root() const { return nodes.at(kRoot); }
  std::size_t layer_count() const { return nodes.empty() ? 0 : nodes.size() - 1; }
};

struct OperatorNode {
  std::string name;
  TimeNs start_ts = 0;
  TimeNs end_ts = 0;
  std::vector<std::int64_t> sequence_numbers;  // sorted, unique
  bool is_root = true;
  std::size_t event_id = 0;
};

enum class MarkerKind { ProfilerStep, ZeroGrad, OptimizerStep };

std::string_view to_string(MarkerKind kind) noexcept;

struct AnnotationMarker {
  MarkerKind kind = MarkerKind::ProfilerStep;
  TimeNs start_ts = 0;
  TimeNs end_ts = 0;
  std::size_t iteration_index = 0;
  std::string name;
};

enum class BlockRole { Unclassified, Model, Batch, Gradient, OptimizerState, Temporary, Retained };

std::string_view to_string(BlockRole role) noexcept;

struct MemoryBlock {
  std::size_t block_id = 0;
  std::uint64_t addr = 0;
  Bytes size = 0;
  TimeNs alloc_time = 0;
  std::optional<TimeNs> free_time;
  bool permanent = false;
  BlockRole role = BlockRole::Unclassified;
  std::size_t alloc_event_id = 0;
  std::optional<std::size_t> free_event_id;
};

// Layer-call tree from python_function events. Frames whose name does not
// start with one of `layer_prefixes` are collapsed; their layer descendants are
// re-parented to the nearest layer ancestor (or the synthetic root).
LayerTree build_layer_tree(std::span<const TraceEvent> functions,
                           std::span<const std::string> layer_prefixes);

// Operators not contained in any other operator's [start, end) interval. Each
// root absorbs the sequence numbers of the operators nested inside it.
std::vector<OperatorNode> build_operator_roots(std::span<const TraceEvent> ops);

// Typed markers from user annotations. Throws NoIterationMarkers when no
// profiler-step annotation exists.
std::vector<AnnotationMarker> extract_markers(std::span<const TraceEvent> annotations);

// Same as extract_markers but returns an empty iteration set instead of throwing.
std::vector<AnnotationMarker> extract_markers_lenient(std::span<const TraceEvent> annotations);

// Pairs memory events into block lifetimes: the first event at an address opens
// a block, the next event at that address closes it. Open blocks left at the
// end are permanent. Anomalies are reported through `warnings`.
std::vector<MemoryBlock> group_memory_events(std::span<const TraceEvent> instants,
                                             std::vector<std::string>* warnings = nullptr);

}  // namespace peakmem
