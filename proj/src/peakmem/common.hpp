// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace peakmem {

using Bytes = std::uint64_t;
// Nanoseconds relative to the first event of a trace. Synthetic requests may
// carry negative values (placed before the trace starts).
using TimeNs = std::int64_t;

inline constexpr Bytes kKiB = Bytes{1} << 10;
inline constexpr Bytes kMiB = Bytes{1} << 20;
inline constexpr Bytes kGiB = Bytes{1} << 30;

enum class ErrorCode {
  InvalidArgument = 1,
  Io,
  MalformedTrace,
  EmptyTrace,
  UnknownCategory,
  MalformedSidecar,
  CyclicParentLink,
  NoIterationMarkers,
  NoGradientBlocks,
  MissingBatchBytes,
  NoIterations,
  MalformedSequence,
  OutOfMemory,
  DuplicateHandle,
  UnknownHandle,
  DoubleFree,
  ZeroSize,
  EmptyInput,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parses "512", "4KiB", "1.5 MiB", "8GiB". Only binary suffixes are accepted.
Bytes parse_size(std::string_view text);

// 64-bit FNV-1a, used for stable config digests.
std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace peakmem
