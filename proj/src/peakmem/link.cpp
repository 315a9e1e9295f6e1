// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/link.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>

#include "json.hpp"

namespace peakmem {

namespace {

constexpr std::size_t kUnowned = std::numeric_limits<std::size_t>::max();

// Post-order walk so that descendants claim their operators first.
void claim_ops(const LayerTree& tree, std::size_t node_index, std::span<const OperatorNode> roots,
               std::vector<std::size_t>& owner_node) {
  const LayerNode& node = tree.nodes[node_index];
  for (std::size_t child : node.children) claim_ops(tree, child, roots, owner_node);
  if (node_index == LayerTree::kRoot || node.is_wrapper) return;

  auto first = std::lower_bound(roots.begin(), roots.end(), node.start_ts,
                                [](const OperatorNode& op, TimeNs t) { return op.start_ts < t; });
  for (auto it = first; it != roots.end() && it->start_ts < node.end_ts; ++it) {
    const auto index = static_cast<std::size_t>(it - roots.begin());
    if (owner_node[index] == kUnowned && it->end_ts <= node.end_ts) owner_node[index] = node_index;
  }
}

// Latest-starting root whose [start, end) contains t.
class RootLocator {
 public:
  explicit RootLocator(std::span<const OperatorNode> roots) : roots_(roots) {
    prefix_max_end_.reserve(roots.size());
    TimeNs running = std::numeric_limits<TimeNs>::min();
    for (const auto& r : roots) {
      running = std::max(running, r.end_ts);
      prefix_max_end_.push_back(running);
    }
  }

  std::optional<std::size_t> find(TimeNs t) const {
    auto it = std::upper_bound(roots_.begin(), roots_.end(), t,
                               [](TimeNs value, const OperatorNode& op) { return value < op.start_ts; });
    auto i = static_cast<std::ptrdiff_t>(it - roots_.begin()) - 1;
    for (; i >= 0 && prefix_max_end_[static_cast<std::size_t>(i)] > t; --i) {
      if (roots_[static_cast<std::size_t>(i)].end_ts > t) return static_cast<std::size_t>(i);
    }
    return std::nullopt;
  }

 private:
  std::span<const OperatorNode> roots_;
  std::vector<TimeNs> prefix_max_end_;
};

}  // namespace

ProfileMap link_layers_to_ops(const LayerTree& layers, std::span<const OperatorNode> roots) {
  ProfileMap map;
  if (layers.nodes.empty()) return map;

  std::vector<std::size_t> owner_node(roots.size(), kUnowned);
  claim_ops(layers, LayerTree::kRoot, roots, owner_node);

  std::unordered_map<std::size_t, std::size_t> profile_of_node;
  for (std::size_t k = 1; k < layers.nodes.size(); ++k) {
    if (layers.nodes[k].is_wrapper) continue;
    profile_of_node.emplace(k, map.profiles.size());
    LayerMemoryProfile profile;
    profile.layer = k;
    map.profiles.push_back(std::move(profile));
  }
  for (std::size_t op = 0; op < roots.size(); ++op) {
    if (owner_node[op] == kUnowned) continue;
    map.profiles[profile_of_node.at(owner_node[op])].forward_ops.push_back(op);
  }
  return map;
}

void attach_backward_ops(ProfileMap& profiles, std::span<const OperatorNode> roots) {
  std::unordered_map<std::int64_t, std::vector<std::size_t>> ops_by_seq;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    for (std::int64_t seq : roots[i].sequence_numbers) ops_by_seq[seq].push_back(i);
  }
  for (auto& profile : profiles.profiles) {
    std::vector<std::size_t> found;
    for (std::size_t fwd : profile.forward_ops) {
      for (std::int64_t seq : roots[fwd].sequence_numbers) {
        const auto it = ops_by_seq.find(seq);
        if (it == ops_by_seq.end()) continue;
        found.insert(found.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    std::erase_if(found, [&](std::size_t op) {
      return std::binary_search(profile.forward_ops.begin(), profile.forward_ops.end(), op);
    });
    profile.backward_ops = std::move(found);
  }
}

void attach_blocks(ProfileMap& profiles, std::span<const OperatorNode> roots,
                   std::vector<MemoryBlock>& blocks) {
  // Forward ownership is exclusive; a backward op claimed by several layers
  // goes to the first of them.
  std::vector<std::size_t> forward_owner(roots.size(), kUnowned);
  std::vector<std::size_t> backward_owner(roots.size(), kUnowned);
  for (std::size_t p = 0; p < profiles.profiles.size(); ++p) {
    for (std::size_t op : profiles.profiles[p].forward_ops) forward_owner[op] = p;
  }
  for (std::size_t p = 0; p < profiles.profiles.size(); ++p) {
    for (std::size_t op : profiles.profiles[p].backward_ops) {
      if (backward_owner[op] == kUnowned) backward_owner[op] = p;
    }
  }

  const RootLocator locator(roots);
  for (auto& block : blocks) {
    block.role = BlockRole::Unclassified;
    const auto op = locator.find(block.alloc_time);
    if (!op) continue;
    const bool forward = forward_owner[*op] != kUnowned;
    const std::size_t owner = forward ? forward_owner[*op] : backward_owner[*op];
    if (owner == kUnowned) continue;

    LayerMemoryProfile& profile = profiles.profiles[owner];
    const OperatorNode& span = roots[*op];
    const bool freed_inside = block.free_time && *block.free_time >= span.start_ts &&
                              *block.free_time < span.end_ts;
    if (freed_inside) {
      block.role = BlockRole::Temporary;
      profile.temporary_blocks.push_back(block.block_id);
    } else {
      block.role = BlockRole::Retained;
      profile.retained_blocks.push_back(block.block_id);
      if (!forward) profile.backward_retained_blocks.push_back(block.block_id);
    }
  }
}

TraceAnalysis analyze_trace(const TraceBundle& bundle, std::span<const std::string> layer_prefixes) {
  TraceAnalysis analysis;
  const auto functions = filter_category(bundle, EventCategory::PythonFunction);
  const auto ops = filter_category(bundle, EventCategory::CpuOp);
  const auto annotations = filter_category(bundle, EventCategory::UserAnnotation);
  const auto instants = filter_category(bundle, EventCategory::CpuInstantEvent);

  analysis.layers = build_layer_tree(functions, layer_prefixes);
  analysis.roots = build_operator_roots(ops);
  analysis.markers = extract_markers_lenient(annotations);
  analysis.blocks = group_memory_events(instants, &analysis.warnings);
  analysis.profiles = link_layers_to_ops(analysis.layers, analysis.roots);
  attach_backward_ops(analysis.profiles, analysis.roots);
  attach_blocks(analysis.profiles, analysis.roots, analysis.blocks);
  return analysis;
}

std::string dump_structure(const TraceAnalysis& analysis) {
  using nlohmann::json;
  json layers = json::array();
  for (std::size_t k = 0; k < analysis.layers.nodes.size(); ++k) {
    const auto& node = analysis.layers.nodes[k];
    layers.push_back({{"index", k},
                      {"name", node.name},
                      {"class", node.class_name},
                      {"start_ns", node.start_ts},
                      {"end_ns", node.end_ts},
                      {"parent", node.parent ? json(*node.parent) : json(nullptr)},
                      {"children", node.children},
                      {"is_wrapper", node.is_wrapper}});
  }
  json roots = json::array();
  for (const auto& op : analysis.roots) {
    roots.push_back({{"name", op.name},
                     {"start_ns", op.start_ts},
                     {"end_ns", op.end_ts},
                     {"sequence_numbers", op.sequence_numbers}});
  }
  json markers = json::array();
  for (const auto& m : analysis.markers) {
    markers.push_back({{"kind", std::string(to_string(m.kind))},
                       {"name", m.name},
                       {"start_ns", m.start_ts},
                       {"end_ns", m.end_ts},
                       {"iteration", m.iteration_index}});
  }
  json blocks = json::array();
  for (const auto& b : analysis.blocks) {
    blocks.push_back({{"block_id", b.block_id},
                      {"addr", b.addr},
                      {"size", b.size},
                      {"alloc_ns", b.alloc_time},
                      {"free_ns", b.free_time ? json(*b.free_time) : json(nullptr)},
                      {"permanent", b.permanent},
                      {"role", std::string(to_string(b.role))}});
  }
  json profiles = json::array();
  for (const auto& p : analysis.profiles.profiles) {
    Bytes retained = 0;
    Bytes temporary = 0;
    for (std::size_t id : p.retained_blocks) retained += analysis.blocks[id].size;
    for (std::size_t id : p.temporary_blocks) temporary += analysis.blocks[id].size;
    profiles.push_back({{"layer", p.layer},
                        {"name", analysis.layers.nodes[p.layer].name},
                        {"forward_ops", p.forward_ops},
                        {"backward_ops", p.backward_ops},
                        {"retained_blocks", p.retained_blocks},
                        {"temporary_blocks", p.temporary_blocks},
                        {"retained_bytes", retained},
                        {"temporary_bytes", temporary}});
  }
  json doc = {{"layers", std::move(layers)},   {"operator_roots", std::move(roots)},
              {"markers", std::move(markers)}, {"blocks", std::move(blocks)},
              {"profiles", std::move(profiles)}, {"warnings", analysis.warnings}};
  return doc.dump(2);
}

}  // namespace peakmem
