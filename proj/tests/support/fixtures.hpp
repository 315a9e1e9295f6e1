// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "peakmem/link.hpp"
#include "peakmem/trace.hpp"

#ifndef PEAKMEM_FIXTURE_DIR
#error "PEAKMEM_FIXTURE_DIR must be defined"
#endif

namespace testing_support {

inline const std::array<std::string, 4> kFixtures{"tiny_mlp_sgd", "tiny_mlp_adam", "tiny_mlp_sgd_prebwd",
                                                  "tiny_mlp_adam_1iter"};

inline std::filesystem::path fixture_path(const std::string& file) {
  return std::filesystem::path(PEAKMEM_FIXTURE_DIR) / file;
}

inline nlohmann::json load_manifest(const std::string& name) {
  return nlohmann::json::parse(peakmem::read_file(fixture_path(name + ".manifest.json")));
}

struct LoadedFixture {
  peakmem::TraceBundle bundle;
  peakmem::Sidecar sidecar;
  peakmem::TraceAnalysis analysis;
};

inline LoadedFixture load_fixture(const std::string& name) {
  LoadedFixture f;
  f.bundle = peakmem::parse_trace(fixture_path(name + ".trace.json"));
  f.sidecar = peakmem::parse_sidecar(fixture_path(name + ".sidecar.json"));
  f.analysis = peakmem::analyze_trace(f.bundle, f.sidecar.layer_prefixes);
  return f;
}

}  // namespace testing_support
