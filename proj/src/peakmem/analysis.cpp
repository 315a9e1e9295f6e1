// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <unordered_map>

namespace peakmem {

std::string_view to_string(MarkerKind kind) noexcept {
  switch (kind) {
    case MarkerKind::ProfilerStep: return "profiler_step";
    case MarkerKind::ZeroGrad: return "zero_grad";
    case MarkerKind::OptimizerStep: return "optimizer_step";
  }
  return "unknown";
}

std::string_view to_string(BlockRole role) noexcept {
  switch (role) {
    case BlockRole::Unclassified: return "unclassified";
    case BlockRole::Model: return "model";
    case BlockRole::Batch: return "batch";
    case BlockRole::Gradient: return "gradient";
    case BlockRole::OptimizerState: return "optimizer_state";
    case BlockRole::Temporary: return "temporary";
    case BlockRole::Retained: return "retained";
  }
  return "unknown";
}

namespace {

std::optional<std::string_view> layer_suffix(std::string_view name,
                                             std::span<const std::string> prefixes) {
  for (const auto& prefix : prefixes) {
    if (!prefix.empty() && name.starts_with(prefix)) return name.substr(prefix.size());
  }
  return std::nullopt;
}

// "Linear_0" -> "Linear"
std::string class_name_of(std::string_view instance) {
  const auto underscore = instance.rfind('_');
  if (underscore == std::string_view::npos || underscore + 1 == instance.size()) {
    return std::string(instance);
  }
  const auto tail = instance.substr(underscore + 1);
  const bool numeric = std::all_of(tail.begin(), tail.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  return std::string(numeric ? instance.substr(0, underscore) : instance);
}

bool by_time(const TraceEvent& a, const TraceEvent& b) {
  if (a.start_ts != b.start_ts) return a.start_ts < b.start_ts;
  return a.event_id < b.event_id;
}

}  // namespace

LayerTree build_layer_tree(std::span<const TraceEvent> functions,
                           std::span<const std::string> layer_prefixes) {
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  const std::size_t n = functions.size();

  std::unordered_map<std::int64_t, std::size_t> by_function_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (functions[i].function_id) by_function_id.emplace(*functions[i].function_id, i);
  }
  auto parent_of = [&](std::size_t i) -> std::size_t {
    const auto& parent = functions[i].parent_id;
    if (!parent) return kNone;
    const auto it = by_function_id.find(*parent);
    return it == by_function_id.end() ? kNone : it->second;
  };

  std::vector<bool> is_layer(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    is_layer[i] = layer_suffix(functions[i].name, layer_prefixes).has_value();
  }

  // Nearest layer ancestor per frame, resolved with an explicit stack so deep
  // Python stacks cannot overflow. kNone means "attach to the synthetic root".
  enum class Mark : unsigned char { Unvisited, Visiting, Done };
  std::vector<Mark> mark(n, Mark::Unvisited);
  std::vector<std::size_t> layer_ancestor(n, kNone);
  std::vector<std::size_t> chain;
  for (std::size_t start = 0; start < n; ++start) {
    if (mark[start] == Mark::Done) continue;
    chain.clear();
    std::size_t cur = start;
    std::size_t resolved = kNone;
    while (true) {
      if (mark[cur] == Mark::Visiting) {
        throw Error(ErrorCode::CyclicParentLink,
                    "python_function parent chain revisits '" + functions[cur].name + "'");
      }
      mark[cur] = Mark::Visiting;
      chain.push_back(cur);
      const std::size_t parent = parent_of(cur);
      if (parent == kNone) {
        resolved = kNone;
        break;
      }
      if (mark[parent] == Mark::Done) {
        resolved = is_layer[parent] ? parent : layer_ancestor[parent];
        break;
      }
      cur = parent;
    }
    // Unwind: assign ancestors from the top of the chain downwards.
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      layer_ancestor[*it] = resolved;
      mark[*it] = Mark::Done;
      if (is_layer[*it]) resolved = *it;
    }
  }

  LayerTree tree;
  LayerNode root;
  root.name = "<root>";
  root.class_name = "<root>";
  if (n > 0) {
    root.start_ts = std::numeric_limits<TimeNs>::max();
    root.end_ts = std::numeric_limits<TimeNs>::min();
    for (const auto& f : functions) {
      root.start_ts = std::min(root.start_ts, f.start_ts);
      root.end_ts = std::max(root.end_ts, f.end_ts());
    }
  }
  tree.nodes.push_back(std::move(root));

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_layer[i]) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return by_time(functions[a], functions[b]);
  });

  std::unordered_map<std::size_t, std::size_t> node_of;  // function index -> node index
  for (std::size_t i : order) {
    LayerNode node;
    const auto& f = functions[i];
    node.name = f.name;
    node.class_name = class_name_of(*layer_suffix(f.name, layer_prefixes));
    node.start_ts = f.start_ts;
    node.end_ts = f.end_ts();
    node.event_id = f.event_id;
    node_of.emplace(i, tree.nodes.size());
    tree.nodes.push_back(std::move(node));
  }
  // Parents start no later than their children, so in time order every parent
  // node already exists when its child is linked.
  for (std::size_t i : order) {
    const std::size_t self = node_of.at(i);
    const std::size_t parent =
        layer_ancestor[i] == kNone ? LayerTree::kRoot : node_of.at(layer_ancestor[i]);
    tree.nodes[self].parent = parent;
    tree.nodes[self].depth = tree.nodes[parent].depth + 1;
    tree.nodes[parent].children.push_back(self);
  }
  for (std::size_t k = 1; k < tree.nodes.size(); ++k) {
    tree.nodes[k].is_wrapper = !tree.nodes[k].children.empty();
  }
  return tree;
}

std::vector<OperatorNode> build_operator_roots(std::span<const TraceEvent> ops) {
  std::vector<const TraceEvent*> sorted;
  sorted.reserve(ops.size());
  for (const auto& op : ops) sorted.push_back(&op);
  std::sort(sorted.begin(), sorted.end(), [](const TraceEvent* a, const TraceEvent* b) {
    if (a->start_ts != b->start_ts) return a->start_ts < b->start_ts;
    if (a->end_ts() != b->end_ts()) return a->end_ts() > b->end_ts();
    return a->event_id < b->event_id;
  });

  std::vector<OperatorNode> roots;
  // Every root seen so far starts at or before the current op, so the op is
  // nested iff the root reaching furthest right covers it.
  std::optional<std::size_t> widest;
  for (const TraceEvent* op : sorted) {
    if (widest) {
      OperatorNode& root = roots[*widest];
      if (op->start_ts < root.end_ts && op->end_ts() <= root.end_ts) {
        if (op->sequence_number) root.sequence_numbers.push_back(*op->sequence_number);
        continue;
      }
    }
    OperatorNode node;
    node.name = op->name;
    node.start_ts = op->start_ts;
    node.end_ts = op->end_ts();
    node.event_id = op->event_id;
    if (op->sequence_number) node.sequence_numbers.push_back(*op->sequence_number);
    roots.push_back(std::move(node));
    if (!widest || roots.back().end_ts > roots[*widest].end_ts) widest = roots.size() - 1;
  }
  for (auto& root : roots) {
    auto& seqs = root.sequence_numbers;
    std::sort(seqs.begin(), seqs.end());
    seqs.erase(std::unique(seqs.begin(), seqs.end()), seqs.end());
  }
  return roots;
}

namespace {

std::optional<MarkerKind> classify_annotation(std::string_view name) {
  if (name.starts_with("ProfilerStep")) return MarkerKind::ProfilerStep;
  if (name.find("zero_grad") != std::string_view::npos) return MarkerKind::ZeroGrad;
  if (name.starts_with("Optimizer.step") || name == "optimizer.step" || name == "step") {
    return MarkerKind::OptimizerStep;
  }
  return std::nullopt;
}

}  // namespace

std::vector<AnnotationMarker> extract_markers_lenient(std::span<const TraceEvent> annotations) {
  std::vector<const TraceEvent*> sorted;
  for (const auto& a : annotations) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(),
            [](const TraceEvent* a, const TraceEvent* b) { return by_time(*a, *b); });

  std::vector<AnnotationMarker> markers;
  std::size_t steps_seen = 0;
  for (const TraceEvent* a : sorted) {
    const auto kind = classify_annotation(a->name);
    if (!kind) continue;
    AnnotationMarker marker;
    marker.kind = *kind;
    marker.start_ts = a->start_ts;
    marker.end_ts = a->end_ts();
    marker.name = a->name;
    if (*kind == MarkerKind::ProfilerStep) {
      marker.iteration_index = steps_seen++;
    } else {
      // Enclosing iteration: the latest profiler step started so far.
      marker.iteration_index = steps_seen == 0 ? 0 : steps_seen - 1;
    }
    markers.push_back(std::move(marker));
  }
  return markers;
}

std::vector<AnnotationMarker> extract_markers(std::span<const TraceEvent> annotations) {
  auto markers = extract_markers_lenient(annotations);
  const bool has_step = std::any_of(markers.begin(), markers.end(), [](const AnnotationMarker& m) {
    return m.kind == MarkerKind::ProfilerStep;
  });
  if (!has_step) {
    throw Error(ErrorCode::NoIterationMarkers,
                "no ProfilerStep annotation; iterations cannot be segmented");
  }
  return markers;
}

std::vector<MemoryBlock> group_memory_events(std::span<const TraceEvent> instants,
                                             std::vector<std::string>* warnings) {
  auto warn = [warnings](std::string message) {
    if (warnings != nullptr) warnings->push_back(std::move(message));
  };

  std::vector<const TraceEvent*> sorted;
  sorted.reserve(instants.size());
  for (const auto& e : instants) {
    if (e.addr && e.bytes) sorted.push_back(&e);
  }
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TraceEvent* a, const TraceEvent* b) { return by_time(*a, *b); });

  std::vector<MemoryBlock> blocks;
  std::unordered_map<std::uint64_t, std::size_t> open;  // addr -> index in blocks

  auto close = [&](std::size_t index, const TraceEvent& event) {
    MemoryBlock& block = blocks[index];
    block.free_time = event.start_ts;
    block.free_event_id = event.event_id;
  };

  for (const TraceEvent* event : sorted) {
    const std::uint64_t addr = *event->addr;
    const std::int64_t bytes = *event->bytes;
    const auto it = open.find(addr);
    if (bytes > 0) {
      if (it != open.end()) {
        warn("two allocations at address " + std::to_string(addr) +
             " without a free in between; closing the earlier block");
        close(it->second, *event);
        open.erase(it);
      }
      MemoryBlock block;
      block.addr = addr;
      block.size = static_cast<Bytes>(bytes);
      block.alloc_time = event->start_ts;
      block.alloc_event_id = event->event_id;
      open.emplace(addr, blocks.size());
      blocks.push_back(block);
    } else if (it != open.end()) {
      if (static_cast<Bytes>(-bytes) != blocks[it->second].size) {
        warn("free of " + std::to_string(-bytes) + " bytes at address " + std::to_string(addr) +
             " closes a block of " + std::to_string(blocks[it->second].size) + " bytes");
      }
      close(it->second, *event);
      open.erase(it);
    } else {
      warn("free at address " + std::to_string(addr) + " (event #" +
           std::to_string(event->event_id) + ") has no prior allocation; dropped");
    }
  }

  for (auto& block : blocks) block.permanent = !block.free_time.has_value();
  // Allocation order already equals alloc_time order.
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].block_id = i;
  return blocks;
}

}  // namespace peakmem
