// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "doctest.h"
#include "expect_error.hpp"
#include "fixtures.hpp"
#include "pairing_oracle.hpp"
#include "peakmem/analysis.hpp"
#include "trace_builder.hpp"

using namespace peakmem;
using testing_support::TraceBuilder;

namespace {

const std::vector<std::string> kPrefixes{"nn.Module: "};

std::vector<TraceEvent> events_of(const TraceBuilder& b, EventCategory category) {
  return filter_category(parse_trace_text(b.text(), "inline"), category);
}

LayerTree tree_of(const TraceBuilder& b) {
  return build_layer_tree(events_of(b, EventCategory::PythonFunction), kPrefixes);
}

std::vector<OperatorNode> roots_of(const TraceBuilder& b) {
  return build_operator_roots(events_of(b, EventCategory::CpuOp));
}

std::vector<MemoryBlock> blocks_of(const TraceBuilder& b, std::vector<std::string>* warnings = nullptr) {
  return group_memory_events(events_of(b, EventCategory::CpuInstantEvent), warnings);
}

constexpr TimeNs us(double v) { return static_cast<TimeNs>(v * 1000); }

}  // namespace

TEST_CASE("layer tree: one root with two children") {
  const auto tree = tree_of(TraceBuilder()
                                .function("nn.Module: Sequential_0", 0, 100, 1)
                                .function("nn.Module: Linear_0", 10, 20, 2, 1)
                                .function("nn.Module: ReLU_0", 40, 10, 3, 1));
  REQUIRE(tree.layer_count() == 3);
  REQUIRE(tree.root().children.size() == 1);
  const LayerNode& seq = tree.nodes[tree.root().children[0]];
  CHECK(seq.class_name == "Sequential");
  CHECK(seq.is_wrapper);
  REQUIRE(seq.children.size() == 2);
  CHECK(tree.nodes[seq.children[0]].class_name == "Linear");
  CHECK(tree.nodes[seq.children[1]].class_name == "ReLU");
  CHECK_FALSE(tree.nodes[seq.children[0]].is_wrapper);
}

TEST_CASE("layer tree: non-layer frames are collapsed") {
  const auto tree = tree_of(TraceBuilder()
                                .function("nn.Module: Block_0", 0, 100, 1)
                                .function("torch/nn/functional.py(12): helper", 5, 50, 2, 1)
                                .function("nn.Module: Conv2d_0", 10, 20, 3, 2));
  REQUIRE(tree.layer_count() == 2);
  const LayerNode& a = tree.nodes[tree.root().children.at(0)];
  CHECK(a.class_name == "Block");
  REQUIRE(a.children.size() == 1);
  const LayerNode& c = tree.nodes[a.children[0]];
  CHECK(c.class_name == "Conv2d");
  CHECK(c.depth == a.depth + 1);
}

TEST_CASE("layer tree: cyclic parent links are rejected") {
  TraceBuilder b;
  b.function("nn.Module: A_0", 0, 10, 1, 2).function("nn.Module: B_0", 1, 5, 2, 1);
  CHECK(testing_support::error_code([&] { tree_of(b); }) == ErrorCode::CyclicParentLink);
}

TEST_CASE("layer tree: fixture modules match the manifest") {
  for (const auto& name : testing_support::kFixtures) {
    CAPTURE(name);
    const auto f = testing_support::load_fixture(name);
    std::set<std::string> classes;
    for (std::size_t k = 1; k < f.analysis.layers.nodes.size(); ++k) {
      classes.insert(f.analysis.layers.nodes[k].class_name);
    }
    const auto expected = testing_support::load_manifest(name)["module_names"].get<std::set<std::string>>();
    CHECK(classes == expected);
  }
}

TEST_CASE("operator roots: containment by interval") {
  const auto roots = roots_of(TraceBuilder().op("A", 0, 10).op("B", 2, 3).op("C", 20, 10));
  REQUIRE(roots.size() == 2);
  CHECK(roots[0].name == "A");
  CHECK(roots[1].name == "C");
}

TEST_CASE("operator roots absorb nested sequence numbers") {
  const auto roots = roots_of(TraceBuilder().op("A", 0, 10, 3).op("B", 2, 3, 7).op("C", 3, 1, 7));
  REQUIRE(roots.size() == 1);
  CHECK(roots[0].sequence_numbers == std::vector<std::int64_t>{3, 7});
}

TEST_CASE("operator roots: touching intervals are not nested") {
  const auto roots = roots_of(TraceBuilder().op("A", 0, 10).op("B", 10, 10));
  CHECK(roots.size() == 2);
}

TEST_CASE("operator roots: identical intervals keep the first") {
  const auto roots = roots_of(TraceBuilder().op("outer", 0, 10, 1).op("inner", 0, 10, 2));
  REQUIRE(roots.size() == 1);
  CHECK(roots[0].name == "outer");
  CHECK(roots[0].sequence_numbers == std::vector<std::int64_t>{1, 2});
}

TEST_CASE("operator roots: fixture counts and pairwise non-nesting") {
  for (const auto& name : testing_support::kFixtures) {
    CAPTURE(name);
    const auto f = testing_support::load_fixture(name);
    const auto& roots = f.analysis.roots;
    CHECK(roots.size() == testing_support::load_manifest(name)["root_op_count"].get<std::size_t>());
    for (std::size_t i = 0; i < roots.size(); ++i) {
      for (std::size_t j = 0; j < roots.size(); ++j) {
        if (i == j) continue;
        const bool nested = roots[i].start_ts <= roots[j].start_ts && roots[j].start_ts < roots[i].end_ts &&
                            roots[j].end_ts <= roots[i].end_ts;
        CHECK_FALSE(nested);
      }
    }
  }
}

TEST_CASE("markers: typed and attributed to iterations") {
  const auto markers = extract_markers(events_of(TraceBuilder()
                                                     .annotation("ProfilerStep#0", 0, 100)
                                                     .annotation("Optimizer.zero_grad#SGD.zero_grad", 1, 2)
                                                     .annotation("Optimizer.step#SGD.step", 80, 10)
                                                     .annotation("ProfilerStep#1", 100, 100),
                                                 EventCategory::UserAnnotation));
  REQUIRE(markers.size() == 4);
  std::size_t steps = 0;
  for (const auto& m : markers) {
    if (m.kind == MarkerKind::ProfilerStep) {
      CHECK(m.iteration_index == steps++);
    } else {
      CHECK(m.iteration_index == 0);
    }
  }
  CHECK(steps == 2);
  CHECK(std::count_if(markers.begin(), markers.end(), [](const auto& m) { return m.kind == MarkerKind::ZeroGrad; }) == 1);
}

TEST_CASE("markers: no zero_grad yields no ZeroGrad marker") {
  const auto markers = extract_markers(
      events_of(TraceBuilder().annotation("ProfilerStep#0", 0, 10), EventCategory::UserAnnotation));
  REQUIRE(markers.size() == 1);
  CHECK(markers[0].kind == MarkerKind::ProfilerStep);
}

TEST_CASE("markers: a trace without profiler steps cannot be segmented") {
  const auto annotations =
      events_of(TraceBuilder().annotation("Optimizer.step#SGD.step", 0, 10), EventCategory::UserAnnotation);
  CHECK(testing_support::error_code([&] { extract_markers(annotations); }) == ErrorCode::NoIterationMarkers);
  CHECK(extract_markers_lenient(annotations).size() == 1);
}

TEST_CASE("markers: fixture iteration indices") {
  const auto f = testing_support::load_fixture("tiny_mlp_sgd");
  std::set<std::size_t> indices;
  for (const auto& m : f.analysis.markers) indices.insert(m.iteration_index);
  CHECK(indices == std::set<std::size_t>{0, 1, 2});
}

TEST_CASE("grouping: alloc then free") {
  const auto blocks = blocks_of(TraceBuilder().memory(0x10, 512, 1).memory(0x10, -512, 5));
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].addr == 0x10u);
  CHECK(blocks[0].size == 512);
  CHECK(blocks[0].alloc_time == 0);
  CHECK(blocks[0].free_time == us(4));
  CHECK_FALSE(blocks[0].permanent);
}

TEST_CASE("grouping: unmatched allocation is permanent") {
  const auto blocks = blocks_of(TraceBuilder().memory(0x10, 512, 1));
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].permanent);
  CHECK_FALSE(blocks[0].free_time.has_value());
}

TEST_CASE("grouping: address reuse is resolved by order") {
  const auto blocks = blocks_of(
      TraceBuilder().memory(7, 64, 1).memory(7, -64, 2).memory(7, 64, 3).memory(7, -64, 9));
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].alloc_time == 0);
  CHECK(blocks[0].free_time == us(1));
  CHECK(blocks[1].alloc_time == us(2));
  CHECK(blocks[1].free_time == us(8));
}

TEST_CASE("grouping: sign anomalies warn instead of failing") {
  std::vector<std::string> warnings;
  const auto blocks = blocks_of(TraceBuilder()
                                    .memory(1, -64, 0)    // free without alloc: dropped
                                    .memory(2, 64, 1)
                                    .memory(2, 128, 2)    // second alloc closes the first
                                    .memory(2, -100, 3),  // size mismatch
                                &warnings);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].free_time == us(2));
  CHECK(blocks[1].size == 128);
  CHECK(blocks[1].free_time == us(3));
  CHECK(warnings.size() == 3);
}

TEST_CASE("grouping: fixture invariants") {
  for (const auto& name : testing_support::kFixtures) {
    CAPTURE(name);
    const auto f = testing_support::load_fixture(name);
    const auto instants = filter_category(f.bundle, EventCategory::CpuInstantEvent);
    const auto& blocks = f.analysis.blocks;
    CHECK(blocks.size() == testing_support::load_manifest(name)["alloc_event_count"].get<std::size_t>());
    CHECK(std::is_sorted(blocks.begin(), blocks.end(),
                         [](const auto& a, const auto& b) { return a.alloc_time < b.alloc_time; }));
    const auto expected = reference::pair_events(instants);
    REQUIRE(expected.size() == blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      CHECK(blocks[i].alloc_event_id == expected[i].alloc_event_id);
      CHECK(blocks[i].free_event_id == expected[i].free_event_id);
      CHECK(blocks[i].permanent == !expected[i].free_event_id.has_value());
    }
  }
}
