// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "peakmem/analysis.hpp"
#include "peakmem/common.hpp"

namespace peakmem {

enum class RequestKind { Alloc, Free };

struct MemoryRequest {
  std::size_t seq_no = 0;
  RequestKind kind = RequestKind::Alloc;
  std::size_t block_id = 0;
  Bytes size = 0;
  TimeNs virtual_ts = 0;
  int stream = 0;

  bool operator==(const MemoryRequest&) const = default;
};

struct RequestSequence {
  std::vector<MemoryRequest> requests;      // sorted by (virtual_ts, seq_no)
  std::vector<TimeNs> iteration_boundaries;  // start of each iteration, then the end of the last
  std::map<std::size_t, BlockRole> phase_tags;
  std::vector<std::string> warnings;
};

// JSON array of {seq_no, kind, block_id, size, stream, virtual_ts, role}.
std::string serialize_sequence(const RequestSequence& sequence);

// Accepts the fields above; virtual_ts and role are optional. Throws
// MalformedSequence on structural problems. Ordering and pairing are checked
// by replay, not here.
RequestSequence parse_sequence_text(std::string_view text);

}  // namespace peakmem
