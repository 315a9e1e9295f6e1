// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/estimator.hpp"

#include <cstdio>

#include "json.hpp"
#include "peakmem/metrics.hpp"

namespace peakmem {

namespace {

std::string digest(const Sidecar& sidecar, const EstimateOptions& options,
                   std::optional<Bytes> capacity) {
  const AllocatorConfig& a = options.allocator;
  nlohmann::json canonical = {
      {"allocator",
       {{"small_size", a.small_size},
        {"small_buffer", a.small_buffer},
        {"min_large_alloc", a.min_large_alloc},
        {"large_buffer", a.large_buffer},
        {"round_large", a.round_large},
        {"alignment", a.alignment},
        {"max_split_size", a.max_split_size ? nlohmann::json(*a.max_split_size) : nlohmann::json(nullptr)}}},
      {"device_capacity", capacity ? nlohmann::json(*capacity) : nlohmann::json(nullptr)},
      {"iterations", options.iterations},
      {"sidecar", nlohmann::json::parse(serialize_sidecar(sidecar))}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

}  // namespace

EstimateReport estimate_sequence(const RequestSequence& sequence, const Sidecar& sidecar,
                                 const EstimateOptions& options) {
  EstimateReport report;
  report.config_id = options.config_id;
  report.initial_memory = sidecar.initial_memory;
  report.iterations = options.iterations;
  report.sequence_length = sequence.requests.size();
  if (options.device_capacity) {
    report.device_capacity = options.device_capacity;
  } else if (sidecar.device_capacity > 0) {
    report.device_capacity = sidecar.device_capacity;
  }
  report.config_digest = digest(sidecar, options, report.device_capacity);

  AllocatorConfig cfg = options.allocator;
  cfg.device_capacity.reset();
  if (report.device_capacity) {
    const Bytes cap = *report.device_capacity;
    cfg.device_capacity = cap > report.initial_memory ? cap - report.initial_memory : 0;
  }

  for (const auto& r : sequence.requests) {
    if (r.kind != RequestKind::Alloc) continue;
    const auto it = sequence.phase_tags.find(r.block_id);
    const BlockRole role = it == sequence.phase_tags.end() ? BlockRole::Unclassified : it->second;
    report.phase_breakdown[std::string(to_string(role))] += r.size;
  }

  const SimulationResult sim = replay(sequence.requests, cfg, {.record_timeline = false});
  report.reserved_peak = sim.peak_reserved;
  report.allocated_peak = sim.peak_allocated;
  report.predicted_peak = sim.peak_reserved;
  report.oom_seq_no = sim.oom_seq_no;
  report.oom_predicted =
      sim.oom_seq_no.has_value() ||
      (report.device_capacity &&
       predict_oom(report.initial_memory + report.predicted_peak, *report.device_capacity));
  return report;
}

EstimateReport estimate(const TraceAnalysis& analysis, const Sidecar& sidecar,
                        const EstimateOptions& options) {
  const RequestSequence sequence =
      build_sequence(analysis, sidecar, OrchestrationOptions{options.iterations});
  return estimate_sequence(sequence, sidecar, options);
}

std::string serialize_report(const EstimateReport& report, const std::string& stamp) {
  nlohmann::json doc = {
      {"config_id", report.config_id},
      {"estimator", "peakmem"},
      {"predicted_peak", report.predicted_peak},
      {"reserved_peak", report.reserved_peak},
      {"allocated_peak", report.allocated_peak},
      {"initial_memory", report.initial_memory},
      {"device_capacity", report.device_capacity ? nlohmann::json(*report.device_capacity) : nlohmann::json(nullptr)},
      {"oom_predicted", report.oom_predicted},
      {"oom_seq_no", report.oom_seq_no ? nlohmann::json(*report.oom_seq_no) : nlohmann::json(nullptr)},
      {"phase_breakdown", report.phase_breakdown},
      {"sequence_length", report.sequence_length},
      {"iterations", report.iterations},
      {"config_digest", report.config_digest}};
  if (!stamp.empty()) doc["generated_at"] = stamp;
  return doc.dump(2) + "\n";
}

}  // namespace peakmem
