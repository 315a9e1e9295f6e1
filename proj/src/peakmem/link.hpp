// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Associates layers with the operators they run (forward by time containment,
// backward by sequence number) and with the memory blocks those operators
// leave behind. Timestamps are the only link between the three event kinds.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "peakmem/analysis.hpp"
#include "peakmem/trace.hpp"

namespace peakmem {

struct LayerMemoryProfile {
  std::size_t layer = 0;                  // index into LayerTree::nodes
  std::vector<std::size_t> forward_ops;   // indices into the operator-root list
  std::vector<std::size_t> backward_ops;
  std::vector<std::size_t> retained_blocks;  // block ids
  std::vector<std::size_t> temporary_blocks;
  // Retained blocks whose allocating operator is one of backward_ops.
  std::vector<std::size_t> backward_retained_blocks;
};

// One profile per non-wrapper layer, in layer-tree order.
struct ProfileMap {
  std::vector<LayerMemoryProfile> profiles;
};

// Each root operator fully inside a non-wrapper layer's interval goes to the
// innermost such layer. Partial overlaps stay unowned.
ProfileMap link_layers_to_ops(const LayerTree& layers, std::span<const OperatorNode> roots);

// Adds, for every sequence number on a layer's forward operators, all other
// operators carrying that number.
void attach_backward_ops(ProfileMap& profiles, std::span<const OperatorNode> roots);

// Attaches blocks allocated inside an owned operator to its layer and sets
// their role: Temporary when also freed inside that same operator, Retained
// otherwise. Blocks outside owned operators stay Unclassified.
void attach_blocks(ProfileMap& profiles, std::span<const OperatorNode> roots,
                   std::vector<MemoryBlock>& blocks);

struct TraceAnalysis {
  LayerTree layers;
  std::vector<OperatorNode> roots;
  std::vector<AnnotationMarker> markers;
  std::vector<MemoryBlock> blocks;  // indexed by block_id
  ProfileMap profiles;
  std::vector<std::string> warnings;
};

// Runs every analysis and link step over a parsed trace. A trace without
// profiler-step markers is accepted here; sequence building rejects it.
TraceAnalysis analyze_trace(const TraceBundle& bundle, std::span<const std::string> layer_prefixes);

// JSON dump of the layer tree, operator roots, markers, blocks and per-layer
// retained/temporary byte totals.
std::string dump_structure(const TraceAnalysis& analysis);

}  // namespace peakmem
