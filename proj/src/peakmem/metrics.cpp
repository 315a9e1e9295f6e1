// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "peakmem/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "peakmem/trace.hpp"

namespace peakmem {

bool predict_oom(Bytes predicted_peak, Bytes capacity) noexcept { return predicted_peak > capacity; }

bool correctness_round1(bool predicted_oom, bool actual_oom) noexcept {
  return predicted_oom == actual_oom;
}

bool correctness_round2(bool c1, bool oom1, bool oom2) noexcept { return c1 && (!oom2 || oom1); }

double relative_error(Bytes predicted, Bytes actual) {
  if (actual == 0) throw Error(ErrorCode::InvalidArgument, "actual peak must be positive");
  const Bytes diff = predicted > actual ? predicted - actual : actual - predicted;
  return static_cast<double>(diff) / static_cast<double>(actual);
}

std::string_view to_string(Quadrant q) noexcept {
  switch (q) {
    case Quadrant::Optimal: return "optimal";
    case Quadrant::Underestimation: return "underestimation";
    case Quadrant::Overestimation: return "overestimation";
    case Quadrant::Worst: return "worst";
  }
  return "unknown";
}

Quadrant quadrant(double failure_probability, double median_error) noexcept {
  const bool reliable = failure_probability < kQuadrantThreshold;
  const bool accurate = median_error < kQuadrantThreshold;
  if (reliable) return accurate ? Quadrant::Optimal : Quadrant::Overestimation;
  return accurate ? Quadrant::Underestimation : Quadrant::Worst;
}

AggregateMetrics aggregate(std::span<const RunOutcome> runs) {
  if (runs.empty()) throw Error(ErrorCode::EmptyInput, "no runs to aggregate");
  AggregateMetrics m;
  m.run_count = runs.size();
  std::vector<double> errors;
  std::size_t correct = 0;
  for (const auto& r : runs) {
    if (r.correct) ++correct;
    if (r.error) errors.push_back(*r.error);
  }
  m.failure_probability =
      static_cast<double>(m.run_count - correct) / static_cast<double>(m.run_count);
  m.error_count = errors.size();
  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    const std::size_t mid = errors.size() / 2;
    m.median_error = errors.size() % 2 == 1 ? errors[mid] : (errors[mid - 1] + errors[mid]) / 2.0;
  }
  m.performance_score = kFailureWeight * m.failure_probability + kErrorWeight * m.median_error;
  m.quadrant = quadrant(m.failure_probability, m.median_error);
  return m;
}

std::int64_t memory_saved(Bytes capacity, Bytes predicted_peak, bool c1, bool oom1, bool oom2) noexcept {
  const auto cap = static_cast<std::int64_t>(capacity);
  if (c1 && !oom2) return cap - static_cast<std::int64_t>(predicted_peak);
  if (c1 && oom1) return cap;
  return -cap;
}

double avg_memory_saved(std::span<const std::int64_t> savings) {
  if (savings.empty()) throw Error(ErrorCode::EmptyInput, "no savings to average");
  long double sum = 0;
  for (auto s : savings) sum += static_cast<long double>(s);
  return static_cast<double>(sum / static_cast<long double>(savings.size()));
}

namespace {

using nlohmann::json;

struct ReportSummary {
  Bytes predicted_peak = 0;
  bool oom_predicted = false;
  Bytes device_capacity = 0;
};

struct Record {
  Bytes actual_peak = 0;
  bool actual_oom = false;
};

json parse_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw Error(ErrorCode::InvalidArgument, where + ": missing '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, where + ": '" + key + "' has the wrong type");
  }
}

std::map<std::pair<std::string, std::string>, ReportSummary> load_reports(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Io, dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::pair<std::string, std::string>, ReportSummary> reports;
  for (const auto& file : files) {
    const json doc = parse_json_file(file);
    const std::string where = file.string();
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, where + ": report must be an object");
    const std::string estimator = doc.value("estimator", std::string("peakmem"));
    const auto id = require<std::string>(doc, "config_id", where);
    ReportSummary s{require<Bytes>(doc, "predicted_peak", where), require<bool>(doc, "oom_predicted", where),
                    require<Bytes>(doc, "device_capacity", where)};
    if (!reports.emplace(std::pair{id, estimator}, s).second) {
      throw Error(ErrorCode::InvalidArgument, where + ": duplicate report for " + id + "/" + estimator);
    }
  }
  return reports;
}

json round_json(const Record& r, bool correct, std::optional<double> error) {
  return {{"actual_peak", r.actual_peak},
          {"actual_oom", r.actual_oom},
          {"correct", correct},
          {"relative_error", error ? json(*error) : json(nullptr)}};
}

json aggregate_json(const AggregateMetrics& m) {
  return {{"run_count", m.run_count},
          {"error_count", m.error_count},
          {"failure_probability", m.failure_probability},
          {"median_error", m.median_error},
          {"performance_score", m.performance_score},
          {"quadrant", std::string(to_string(m.quadrant))}};
}

}  // namespace

std::string evaluate(const std::filesystem::path& reports_dir, const std::filesystem::path& actuals) {
  const auto reports = load_reports(reports_dir);
  const json doc = parse_json_file(actuals);
  const json& list = doc.is_object() && doc.contains("records") ? doc["records"] : doc;
  if (!list.is_array()) throw Error(ErrorCode::InvalidArgument, "actuals must be an array of records");

  // (config_id, estimator, device) -> round -> record
  using Key = std::tuple<std::string, std::string, std::int64_t>;
  std::map<Key, std::map<int, Record>> runs;
  std::size_t index = 0;
  for (const auto& item : list) {
    const std::string where = actuals.string() + " record " + std::to_string(index++);
    if (!item.is_object()) throw Error(ErrorCode::InvalidArgument, where + ": not an object");
    const int round = require<int>(item, "round", where);
    if (round != 1 && round != 2) throw Error(ErrorCode::InvalidArgument, where + ": round must be 1 or 2");
    Key key{require<std::string>(item, "config_id", where), item.value("estimator", std::string("peakmem")),
            item.value("device", std::int64_t{0})};
    Record r{require<Bytes>(item, "actual_peak", where), require<bool>(item, "actual_oom", where)};
    if (!runs[key].emplace(round, r).second) {
      throw Error(ErrorCode::InvalidArgument, where + ": duplicate round");
    }
  }

  json results = json::array();
  std::map<std::pair<std::string, int>, std::vector<RunOutcome>> outcomes;
  std::map<std::string, std::vector<std::int64_t>> savings;
  for (const auto& [key, rounds] : runs) {
    const auto& [config_id, estimator, device] = key;
    const auto report = reports.find({config_id, estimator});
    if (report == reports.end()) {
      throw Error(ErrorCode::InvalidArgument, "no report for " + config_id + "/" + estimator);
    }
    const ReportSummary& rep = report->second;
    const auto r1 = rounds.find(1);
    if (r1 == rounds.end()) {
      throw Error(ErrorCode::InvalidArgument, config_id + ": round 2 recorded without round 1");
    }
    auto error_of = [&](const Record& r) {
      return r.actual_peak > 0 ? std::optional(relative_error(rep.predicted_peak, r.actual_peak))
                               : std::nullopt;
    };
    json entry = {{"config_id", config_id},
                  {"estimator", estimator},
                  {"device", device},
                  {"predicted_peak", rep.predicted_peak},
                  {"oom_predicted", rep.oom_predicted},
                  {"round2", nullptr},
                  {"memory_saved", nullptr}};
    const bool c1 = correctness_round1(rep.oom_predicted, r1->second.actual_oom);
    entry["round1"] = round_json(r1->second, c1, error_of(r1->second));
    outcomes[{estimator, 1}].push_back({c1, error_of(r1->second)});
    if (const auto r2 = rounds.find(2); r2 != rounds.end()) {
      const bool oom1 = r1->second.actual_oom;
      const bool oom2 = r2->second.actual_oom;
      const bool c2 = correctness_round2(c1, oom1, oom2);
      entry["round2"] = round_json(r2->second, c2, error_of(r2->second));
      outcomes[{estimator, 2}].push_back({c2, error_of(r2->second)});
      const auto saved = memory_saved(rep.device_capacity, rep.predicted_peak, c1, oom1, oom2);
      entry["memory_saved"] = saved;
      savings[estimator].push_back(saved);
    }
    results.push_back(std::move(entry));
  }

  json summary = json::array();
  for (const auto& [key, list_of_runs] : outcomes) {
    json s = aggregate_json(aggregate(list_of_runs));
    s["estimator"] = key.first;
    s["round"] = key.second;
    summary.push_back(std::move(s));
  }
  json avg = json::object();
  for (const auto& [estimator, values] : savings) avg[estimator] = avg_memory_saved(values);

  const json out = {{"results", std::move(results)},
                    {"summary", std::move(summary)},
                    {"avg_memory_saved", std::move(avg)}};
  return out.dump(2) + "\n";
}

}  // namespace peakmem
