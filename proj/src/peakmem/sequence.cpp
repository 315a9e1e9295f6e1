// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/sequence.hpp"

#include <array>

#include "json.hpp"

namespace peakmem {

namespace {

constexpr std::array kRoles{BlockRole::Unclassified,   BlockRole::Model,     BlockRole::Batch,
                            BlockRole::Gradient,       BlockRole::OptimizerState,
                            BlockRole::Temporary,      BlockRole::Retained};

BlockRole role_from_string(std::string_view text) {
  for (BlockRole role : kRoles) {
    if (to_string(role) == text) return role;
  }
  throw Error(ErrorCode::MalformedSequence, "unknown role '" + std::string(text) + "'");
}

}  // namespace

std::string serialize_sequence(const RequestSequence& sequence) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : sequence.requests) {
    nlohmann::ordered_json item = {{"seq_no", r.seq_no},
                                   {"kind", r.kind == RequestKind::Alloc ? "alloc" : "free"},
                                   {"block_id", r.block_id},
                                   {"size", r.size},
                                   {"stream", r.stream},
                                   {"virtual_ts", r.virtual_ts}};
    if (const auto it = sequence.phase_tags.find(r.block_id); it != sequence.phase_tags.end()) {
      item["role"] = std::string(to_string(it->second));
    }
    out.push_back(std::move(item));
  }
  return out.dump(1) + "\n";
}

RequestSequence parse_sequence_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedSequence, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::MalformedSequence, "sequence must be a JSON array");

  RequestSequence sequence;
  sequence.requests.reserve(doc.size());
  std::size_t index = 0;
  for (const auto& item : doc) {
    const std::string where = "request " + std::to_string(index++);
    if (!item.is_object()) throw Error(ErrorCode::MalformedSequence, where + " is not an object");
    auto unsigned_field = [&](const char* key) -> std::uint64_t {
      const auto it = item.find(key);
      if (it == item.end() || !it->is_number_unsigned()) {
        throw Error(ErrorCode::MalformedSequence, where + ": '" + key + "' must be a non-negative integer");
      }
      return it->get<std::uint64_t>();
    };
    MemoryRequest r;
    r.seq_no = unsigned_field("seq_no");
    r.block_id = unsigned_field("block_id");
    const auto kind = item.find("kind");
    if (kind == item.end() || !kind->is_string()) {
      throw Error(ErrorCode::MalformedSequence, where + ": 'kind' must be a string");
    }
    if (*kind == "alloc") {
      r.kind = RequestKind::Alloc;
      r.size = unsigned_field("size");
    } else if (*kind == "free") {
      r.kind = RequestKind::Free;
      if (item.contains("size")) r.size = unsigned_field("size");
    } else {
      throw Error(ErrorCode::MalformedSequence, where + ": unknown kind " + kind->dump());
    }
    if (const auto it = item.find("stream"); it != item.end()) {
      if (!it->is_number_integer()) throw Error(ErrorCode::MalformedSequence, where + ": bad stream");
      r.stream = it->get<int>();
    }
    if (const auto it = item.find("virtual_ts"); it != item.end()) {
      if (!it->is_number_integer()) throw Error(ErrorCode::MalformedSequence, where + ": bad virtual_ts");
      r.virtual_ts = it->get<TimeNs>();
    }
    if (const auto it = item.find("role"); it != item.end() && r.kind == RequestKind::Alloc) {
      if (!it->is_string()) throw Error(ErrorCode::MalformedSequence, where + ": bad role");
      sequence.phase_tags[r.block_id] = role_from_string(it->get<std::string>());
    }
    sequence.requests.push_back(r);
  }
  return sequence;
}

}  // namespace peakmem
