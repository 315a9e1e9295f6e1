// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/trace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace peakmem {

using nlohmann::json;

std::string_view to_string(EventCategory category) noexcept {
  switch (category) {
    case EventCategory::PythonFunction: return "python_function";
    case EventCategory::CpuOp: return "cpu_op";
    case EventCategory::UserAnnotation: return "user_annotation";
    case EventCategory::CpuInstantEvent: return "cpu_instant_event";
    case EventCategory::Other: return "other";
  }
  return "other";
}

namespace {

// Field names of the profiler's trace-event schema. Profiler versions differ in
// spelling for a few of them, hence the alias lists.
struct FieldMap {
  static constexpr std::string_view kEvents = "traceEvents";
  static constexpr std::string_view kPhase = "ph";
  static constexpr std::string_view kCategory = "cat";
  static constexpr std::string_view kName = "name";
  static constexpr std::string_view kTimestamp = "ts";
  static constexpr std::string_view kDuration = "dur";
  static constexpr std::string_view kArgs = "args";
  static constexpr std::string_view kFunctionId = "Python id";
  static constexpr std::string_view kParentId = "Python parent id";
  static constexpr std::string_view kSequenceNumber = "Sequence number";
  static constexpr std::string_view kAddr = "Addr";
  static constexpr std::string_view kBytes = "Bytes";
  static constexpr std::string_view kTotalAllocated = "Total Allocated";
  static constexpr std::string_view kTotalReserved = "Total Reserved";
};

struct CategoryAlias {
  std::string_view label;
  EventCategory category;
};

constexpr std::array<CategoryAlias, 5> kCategoryAliases{{
    {"python_function", EventCategory::PythonFunction},
    {"cpu_op", EventCategory::CpuOp},
    {"Operator", EventCategory::CpuOp},
    {"user_annotation", EventCategory::UserAnnotation},
    {"cpu_instant_event", EventCategory::CpuInstantEvent},
}};

std::optional<EventCategory> lookup_category(std::string_view label) {
  for (const auto& alias : kCategoryAliases) {
    if (alias.label == label) return alias.category;
  }
  return std::nullopt;
}

[[noreturn]] void malformed(std::size_t index, const std::string& why) {
  throw Error(ErrorCode::MalformedTrace,
              "trace event #" + std::to_string(index) + ": " + why);
}

const json* find_field(const json& object, std::string_view key) {
  const auto it = object.find(std::string(key));
  if (it == object.end() || it->is_null()) return nullptr;
  return &*it;
}

std::optional<std::int64_t> optional_int(const json* args, std::string_view key,
                                         std::size_t index) {
  if (args == nullptr) return std::nullopt;
  const json* value = find_field(*args, key);
  if (value == nullptr) return std::nullopt;
  if (value->is_number_integer()) return value->get<std::int64_t>();
  if (value->is_number_float()) {
    const double d = value->get<double>();
    if (std::trunc(d) != d) malformed(index, "field '" + std::string(key) + "' is not integral");
    return static_cast<std::int64_t>(d);
  }
  malformed(index, "field '" + std::string(key) + "' is not a number");
}

double required_number(const json& event, std::string_view key, std::size_t index) {
  const json* value = find_field(event, key);
  if (value == nullptr || !value->is_number()) {
    malformed(index, "missing numeric field '" + std::string(key) + "'");
  }
  return value->get<double>();
}

TimeNs micros_to_ns(double micros) {
  return static_cast<TimeNs>(std::llround(micros * 1000.0));
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return std::move(buffer).str();
}

TraceBundle parse_trace(const std::filesystem::path& path, const ParseOptions& options) {
  return parse_trace_text(read_file(path), path.string(), options);
}

TraceBundle parse_trace_text(std::string_view text, std::string source_path,
                             const ParseOptions& options) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedTrace, std::string("not a JSON document: ") + e.what());
  }

  const json* events = nullptr;
  if (doc.is_array()) {
    events = &doc;
  } else if (doc.is_object()) {
    events = find_field(doc, FieldMap::kEvents);
    if (events == nullptr || !events->is_array()) {
      throw Error(ErrorCode::MalformedTrace, "trace object has no 'traceEvents' array");
    }
  } else {
    throw Error(ErrorCode::MalformedTrace, "trace must be an array or an object");
  }
  if (events->empty()) throw Error(ErrorCode::EmptyTrace, "trace contains no events");

  // First pass: raw timestamps, to find the normalization base.
  double base = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < events->size(); ++i) {
    const json& event = (*events)[i];
    if (!event.is_object()) malformed(i, "event is not an object");
    if (const json* ts = find_field(event, FieldMap::kTimestamp); ts != nullptr) {
      if (!ts->is_number()) malformed(i, "'ts' is not a number");
      base = std::min(base, ts->get<double>());
    }
  }
  if (!std::isfinite(base)) base = 0.0;

  TraceBundle bundle;
  bundle.source_path = std::move(source_path);
  bundle.events.reserve(events->size());

  for (std::size_t i = 0; i < events->size(); ++i) {
    const json& raw = (*events)[i];
    TraceEvent event;
    event.event_id = i;

    if (const json* cat = find_field(raw, FieldMap::kCategory); cat != nullptr) {
      if (!cat->is_string()) malformed(i, "'cat' is not a string");
      event.raw_category = cat->get<std::string>();
      if (auto category = lookup_category(event.raw_category)) {
        event.category = *category;
      } else if (options.strict) {
        throw Error(ErrorCode::UnknownCategory,
                    "trace event #" + std::to_string(i) + ": unknown category '" +
                        event.raw_category + "'");
      }
    }
    if (const json* ph = find_field(raw, FieldMap::kPhase); ph != nullptr && ph->is_string()) {
      event.phase = ph->get<std::string>();
    }

    const bool recognized = event.category != EventCategory::Other;
    if (const json* name = find_field(raw, FieldMap::kName); name != nullptr && name->is_string()) {
      event.name = name->get<std::string>();
    } else if (recognized) {
      malformed(i, "missing 'name'");
    }

    if (recognized) {
      event.start_ts = micros_to_ns(required_number(raw, FieldMap::kTimestamp, i) - base);
    } else if (const json* ts = find_field(raw, FieldMap::kTimestamp); ts != nullptr) {
      event.start_ts = micros_to_ns(ts->get<double>() - base);
    }

    const bool instant = event.category == EventCategory::CpuInstantEvent;
    if (recognized && !instant) {
      const double dur = required_number(raw, FieldMap::kDuration, i);
      if (dur < 0) malformed(i, "negative 'dur'");
      event.duration = micros_to_ns(dur);
    } else if (const json* dur = find_field(raw, FieldMap::kDuration);
               dur != nullptr && dur->is_number() && !instant) {
      event.duration = std::max<TimeNs>(0, micros_to_ns(dur->get<double>()));
    }

    const json* args = find_field(raw, FieldMap::kArgs);
    if (args != nullptr && !args->is_object()) args = nullptr;

    switch (event.category) {
      case EventCategory::PythonFunction:
        event.function_id = optional_int(args, FieldMap::kFunctionId, i);
        event.parent_id = optional_int(args, FieldMap::kParentId, i);
        break;
      case EventCategory::CpuOp:
        event.sequence_number = optional_int(args, FieldMap::kSequenceNumber, i);
        break;
      case EventCategory::CpuInstantEvent: {
        const auto addr = optional_int(args, FieldMap::kAddr, i);
        const auto bytes = optional_int(args, FieldMap::kBytes, i);
        if (!addr || !bytes) malformed(i, "memory event without 'Addr'/'Bytes'");
        if (*bytes == 0) malformed(i, "memory event with zero 'Bytes'");
        event.addr = static_cast<std::uint64_t>(*addr);
        event.bytes = *bytes;
        event.total_allocated = optional_int(args, FieldMap::kTotalAllocated, i);
        event.total_reserved = optional_int(args, FieldMap::kTotalReserved, i);
        break;
      }
      case EventCategory::UserAnnotation:
      case EventCategory::Other:
        break;
    }
    bundle.events.push_back(std::move(event));
  }

  std::stable_sort(bundle.events.begin(), bundle.events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) {
                     if (a.start_ts != b.start_ts) return a.start_ts < b.start_ts;
                     return a.event_id < b.event_id;
                   });
  return bundle;
}

std::vector<TraceEvent> filter_category(const TraceBundle& bundle, EventCategory category) {
  std::vector<TraceEvent> out;
  for (const auto& event : bundle.events) {
    if (event.category == category) out.push_back(event);
  }
  return out;
}

std::string serialize_trace(const TraceBundle& bundle) {
  std::vector<const TraceEvent*> by_id;
  by_id.reserve(bundle.events.size());
  for (const auto& event : bundle.events) by_id.push_back(&event);
  std::sort(by_id.begin(), by_id.end(),
            [](const TraceEvent* a, const TraceEvent* b) { return a->event_id < b->event_id; });

  json events = json::array();
  for (const TraceEvent* e : by_id) {
    json out = json::object();
    if (!e->phase.empty()) out[std::string(FieldMap::kPhase)] = e->phase;
    if (!e->raw_category.empty()) out[std::string(FieldMap::kCategory)] = e->raw_category;
    out[std::string(FieldMap::kName)] = e->name;
    out[std::string(FieldMap::kTimestamp)] = static_cast<double>(e->start_ts) / 1000.0;
    if (e->category != EventCategory::CpuInstantEvent &&
        (e->duration != 0 || e->category != EventCategory::Other)) {
      out[std::string(FieldMap::kDuration)] = static_cast<double>(e->duration) / 1000.0;
    }
    json args = json::object();
    auto put = [&args](std::string_view key, const auto& value) {
      if (value) args[std::string(key)] = *value;
    };
    put(FieldMap::kFunctionId, e->function_id);
    put(FieldMap::kParentId, e->parent_id);
    put(FieldMap::kSequenceNumber, e->sequence_number);
    put(FieldMap::kAddr, e->addr);
    put(FieldMap::kBytes, e->bytes);
    put(FieldMap::kTotalAllocated, e->total_allocated);
    put(FieldMap::kTotalReserved, e->total_reserved);
    if (!args.empty()) out[std::string(FieldMap::kArgs)] = std::move(args);
    events.push_back(std::move(out));
  }
  json doc = json::object();
  doc[std::string(FieldMap::kEvents)] = std::move(events);
  return doc.dump();
}

namespace {

[[noreturn]] void bad_sidecar(const std::string& why) {
  throw Error(ErrorCode::MalformedSidecar, "sidecar: " + why);
}

std::vector<Bytes> byte_list(const json& doc, const char* key) {
  const json* value = find_field(doc, key);
  if (value == nullptr) bad_sidecar(std::string("missing '") + key + "'");
  if (!value->is_array()) bad_sidecar(std::string("'") + key + "' is not an array");
  std::vector<Bytes> out;
  for (const auto& item : *value) {
    if (!item.is_number_unsigned() && !(item.is_number_integer() && item.get<std::int64_t>() >= 0)) {
      bad_sidecar(std::string("'") + key + "' must hold non-negative integers");
    }
    out.push_back(item.get<Bytes>());
  }
  return out;
}

Bytes optional_bytes(const json& doc, const char* key) {
  const json* value = find_field(doc, key);
  if (value == nullptr) return 0;
  if (!value->is_number_unsigned() && !(value->is_number_integer() && value->get<std::int64_t>() >= 0)) {
    bad_sidecar(std::string("'") + key + "' must be a non-negative integer");
  }
  return value->get<Bytes>();
}

}  // namespace

Sidecar parse_sidecar(const std::filesystem::path& path) {
  return parse_sidecar_text(read_file(path));
}

Sidecar parse_sidecar_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    bad_sidecar(std::string("not a JSON document: ") + e.what());
  }
  if (!doc.is_object()) bad_sidecar("expected an object");

  Sidecar sidecar;
  sidecar.param_sizes = byte_list(doc, "param_sizes");
  sidecar.batch_bytes = byte_list(doc, "batch_bytes");
  if (const json* opt = find_field(doc, "optimizer"); opt != nullptr) {
    if (!opt->is_string()) bad_sidecar("'optimizer' is not a string");
    sidecar.optimizer = opt->get<std::string>();
  }
  sidecar.device_capacity = optional_bytes(doc, "device_capacity_bytes");
  sidecar.initial_memory = optional_bytes(doc, "initial_memory_bytes");
  if (const json* prefixes = find_field(doc, "layer_prefixes"); prefixes != nullptr) {
    if (!prefixes->is_array()) bad_sidecar("'layer_prefixes' is not an array");
    sidecar.layer_prefixes.clear();
    for (const auto& p : *prefixes) {
      if (!p.is_string()) bad_sidecar("'layer_prefixes' must hold strings");
      sidecar.layer_prefixes.push_back(p.get<std::string>());
    }
  }
  return sidecar;
}

std::string serialize_sidecar(const Sidecar& sidecar) {
  json doc = {
      {"param_sizes", sidecar.param_sizes},
      {"batch_bytes", sidecar.batch_bytes},
      {"optimizer", sidecar.optimizer},
      {"device_capacity_bytes", sidecar.device_capacity},
      {"initial_memory_bytes", sidecar.initial_memory},
      {"layer_prefixes", sidecar.layer_prefixes},
  };
  return doc.dump();
}

}  // namespace peakmem
