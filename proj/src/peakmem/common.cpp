// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/common.hpp"

#include <array>
#include <cctype>
#include <limits>
#include <utility>

namespace peakmem {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::MalformedSidecar: return "MalformedSidecar";
    case ErrorCode::CyclicParentLink: return "CyclicParentLink";
    case ErrorCode::NoIterationMarkers: return "NoIterationMarkers";
    case ErrorCode::NoGradientBlocks: return "NoGradientBlocks";
    case ErrorCode::MissingBatchBytes: return "MissingBatchBytes";
    case ErrorCode::NoIterations: return "NoIterations";
    case ErrorCode::MalformedSequence: return "MalformedSequence";
    case ErrorCode::OutOfMemory: return "OutOfMemory";
    case ErrorCode::DuplicateHandle: return "DuplicateHandle";
    case ErrorCode::UnknownHandle: return "UnknownHandle";
    case ErrorCode::DoubleFree: return "DoubleFree";
    case ErrorCode::ZeroSize: return "ZeroSize";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

namespace {

constexpr std::array<std::pair<std::string_view, Bytes>, 5> kSuffixes{{
    {"B", 1},
    {"KiB", kKiB},
    {"MiB", kMiB},
    {"GiB", kGiB},
    {"TiB", kGiB << 10},
}};

[[noreturn]] void bad_size(std::string_view text, std::string_view why) {
  throw Error(ErrorCode::InvalidArgument,
              "invalid size '" + std::string(text) + "': " + std::string(why));
}

}  // namespace

Bytes parse_size(std::string_view text) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  skip_space();

  constexpr Bytes kMax = std::numeric_limits<Bytes>::max();
  Bytes whole = 0;
  std::size_t digits = 0;
  for (; pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])); ++pos, ++digits) {
    const Bytes d = static_cast<Bytes>(text[pos] - '0');
    if (whole > (kMax - d) / 10) bad_size(text, "overflow");
    whole = whole * 10 + d;
  }
  Bytes frac = 0;
  Bytes frac_scale = 1;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    for (; pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])); ++pos, ++digits) {
      if (frac_scale > kMax / 10) bad_size(text, "too many fractional digits");
      frac = frac * 10 + static_cast<Bytes>(text[pos] - '0');
      frac_scale *= 10;
    }
  }
  if (digits == 0) bad_size(text, "missing number");
  skip_space();

  std::string_view suffix = text.substr(pos);
  while (!suffix.empty() && std::isspace(static_cast<unsigned char>(suffix.back()))) {
    suffix.remove_suffix(1);
  }
  Bytes multiplier = 1;
  if (!suffix.empty()) {
    bool found = false;
    for (const auto& [name, mult] : kSuffixes) {
      if (suffix == name) {
        multiplier = mult;
        found = true;
        break;
      }
    }
    if (!found) bad_size(text, "unknown suffix (use B, KiB, MiB, GiB, TiB)");
  }

  if (whole > kMax / multiplier) bad_size(text, "overflow");
  Bytes value = whole * multiplier;
  if (frac != 0) {
    if (frac > kMax / multiplier) bad_size(text, "overflow");
    const Bytes scaled = frac * multiplier;
    if (scaled % frac_scale != 0) bad_size(text, "not a whole number of bytes");
    value += scaled / frac_scale;
  }
  return value;
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace peakmem
