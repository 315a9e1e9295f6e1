// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// peakmem command-line front end. Talks to the library only through the C API.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "peakmem/peakmem.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOom = 1;
constexpr int kExitInput = 2;

struct Failure {
  peakmem_status status;
  std::string message;
};

void check(peakmem_status status) {
  if (status != PEAKMEM_OK) throw Failure{status, peakmem_last_error()};
}

struct StringDeleter {
  void operator()(char* s) const { peakmem_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct SessionDeleter {
  void operator()(peakmem_session* s) const { peakmem_session_close(s); }
};
using Session = std::unique_ptr<peakmem_session, SessionDeleter>;

void write_output(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{PEAKMEM_IO, "cannot open " + path + " for writing"};
  out << text;
  if (!out.flush()) throw Failure{PEAKMEM_IO, "failed writing " + path};
}

std::uint64_t parse_size(const std::string& text) {
  std::uint64_t bytes = 0;
  check(peakmem_parse_size(text.c_str(), &bytes));
  return bytes;
}

std::string mib(std::uint64_t bytes) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f MiB", static_cast<double>(bytes) / (1024.0 * 1024.0));
  return buf;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct AllocatorFlags {
  std::string device_capacity;
  std::uint64_t max_split_size_mb = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--device-capacity", device_capacity,
                    "Device memory, e.g. 8GiB or raw bytes (default: sidecar value)");
    cmd->add_option("--max-split-size-mb", max_split_size_mb,
                    "Blocks above this many MiB are never split (default: unbounded)");
  }

  peakmem_allocator_config config() const {
    peakmem_allocator_config cfg{};
    cfg.max_split_size = max_split_size_mb * 1024ull * 1024ull;
    if (!device_capacity.empty()) cfg.device_capacity = parse_size(device_capacity);
    return cfg;
  }
};

Session open_session(const std::string& trace, const std::string& sidecar, bool strict) {
  peakmem_session* raw = nullptr;
  check(peakmem_session_open(trace.c_str(), sidecar.empty() ? nullptr : sidecar.c_str(), strict ? 1 : 0, &raw));
  Session session(raw);
  char* warnings = nullptr;
  check(peakmem_session_warnings(session.get(), &warnings));
  OwnedString owned(warnings);
  for (const auto& w : nlohmann::json::parse(owned.get())) {
    std::cerr << "warning: " << w.get<std::string>() << "\n";
  }
  return session;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predict peak GPU memory of a training task from a CPU profiler trace."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(peakmem_version()));
  app.set_config("--config", "", "TOML/INI file with default option values")->envname("PEAKMEM_CONFIG");

  std::string trace, sidecar, output, dump_structure, dump_sequence, config_id;
  bool strict = false;
  bool fail_on_oom = false;
  bool stamp = false;
  std::uint32_t iterations = 2;
  AllocatorFlags alloc_flags;

  auto* estimate = app.add_subcommand("estimate", "Estimate the peak memory of one configuration");
  estimate->add_option("--trace", trace, "Profiler trace (Chrome trace JSON)")->required()->check(CLI::ExistingFile);
  estimate->add_option("--sidecar", sidecar, "Sidecar with parameter and batch sizes")->check(CLI::ExistingFile);
  alloc_flags.add_to(estimate);
  estimate->add_option("--iterations", iterations, "Training iterations to simulate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  estimate->add_option("--output", output, "Report path (default: standard output)");
  estimate->add_option("--config-id", config_id, "Identifier stored in the report (default: trace name)");
  estimate->add_flag("--fail-on-oom", fail_on_oom, "Exit with status 1 when OOM is predicted");
  estimate->add_flag("--strict", strict, "Reject unknown event categories");
  estimate->add_flag("--stamp", stamp, "Add a generation timestamp to the report");
  estimate->add_option("--dump-structure", dump_structure, "Also write the trace structure here");
  estimate->add_option("--dump-sequence", dump_sequence, "Also write the request sequence here");

  std::string sequence;
  bool emit_timeline = false;
  auto* replay = app.add_subcommand("replay", "Replay a request sequence through the allocator");
  replay->add_option("--sequence", sequence, "Sequence JSON")->required()->check(CLI::ExistingFile);
  AllocatorFlags replay_flags;
  replay_flags.add_to(replay);
  replay->add_flag("--emit-timeline", emit_timeline, "Include the per-request timeline");
  replay->add_option("--output", output, "Result path (default: standard output)");

  auto* analyze = app.add_subcommand("analyze", "Dump layers, operators, markers and blocks of a trace");
  analyze->add_option("--trace", trace, "Profiler trace")->required()->check(CLI::ExistingFile);
  analyze->add_option("--sidecar", sidecar, "Sidecar")->check(CLI::ExistingFile);
  analyze->add_flag("--strict", strict, "Reject unknown event categories");
  analyze->add_option("--output,--dump-structure", output, "Output path (default: standard output)");

  std::string reports, actuals, out;
  auto* evaluate = app.add_subcommand("evaluate", "Score reports against measured runs");
  evaluate->add_option("--reports", reports, "Directory of report JSON files")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--actuals", actuals, "Measured records JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out, "Metrics path (default: standard output)");

  std::uint64_t seed = 0;
  std::uint64_t count = 1000;
  auto* selftest = app.add_subcommand("selftest", "Run the randomized allocator property suite");
  selftest->add_option("--seed", seed, "Random seed")->capture_default_str();
  selftest->add_option("--count", count, "Number of random sequences")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*estimate) {
      Session session = open_session(trace, sidecar, strict);
      if (!dump_structure.empty()) {
        char* s = nullptr;
        check(peakmem_session_dump_structure(session.get(), &s));
        write_output(dump_structure, OwnedString(s).get());
      }
      if (!dump_sequence.empty()) {
        char* s = nullptr;
        check(peakmem_session_dump_sequence(session.get(), iterations, &s));
        write_output(dump_sequence, OwnedString(s).get());
      }
      const std::string stamp_text = stamp ? utc_now() : std::string();
      peakmem_estimate_options opts{};
      opts.allocator = alloc_flags.config();
      opts.iterations = iterations;
      opts.config_id = config_id.empty() ? nullptr : config_id.c_str();
      opts.stamp = stamp ? stamp_text.c_str() : nullptr;
      char* report = nullptr;
      int oom = 0;
      check(peakmem_session_estimate(session.get(), &opts, &report, &oom));
      OwnedString owned(report);
      write_output(output, owned.get());
      if (!output.empty() && output != "-") {
        const auto doc = nlohmann::json::parse(owned.get());
        std::cout << doc["config_id"].get<std::string>() << ": predicted peak "
                  << mib(doc["predicted_peak"].get<std::uint64_t>()) << ", OOM "
                  << (oom ? "predicted" : "not predicted") << "\n";
      }
      return oom && fail_on_oom ? kExitOom : kExitOk;
    }
    if (*replay) {
      std::ifstream in(sequence, std::ios::binary);
      const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      if (!in.good() && !in.eof()) throw Failure{PEAKMEM_IO, "cannot read " + sequence};
      const peakmem_allocator_config cfg = replay_flags.config();
      char* result = nullptr;
      check(peakmem_replay(text.c_str(), &cfg, emit_timeline ? 1 : 0, &result));
      write_output(output, OwnedString(result).get());
      return kExitOk;
    }
    if (*analyze) {
      Session session = open_session(trace, sidecar, strict);
      char* s = nullptr;
      check(peakmem_session_dump_structure(session.get(), &s));
      write_output(output, OwnedString(s).get());
      return kExitOk;
    }
    if (*evaluate) {
      char* s = nullptr;
      check(peakmem_evaluate(reports.c_str(), actuals.c_str(), &s));
      write_output(out, OwnedString(s).get());
      return kExitOk;
    }
    if (*selftest) {
      char* s = nullptr;
      int ok = 0;
      check(peakmem_selftest(seed, count, &s, &ok));
      write_output("", OwnedString(s).get());
      return ok ? kExitOk : 1;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << peakmem_status_string(f.status) << ": " << f.message << "\n";
    return kExitInput;
  }
  return kExitInput;
}
