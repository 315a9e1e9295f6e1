// SPDX-FileCopyrightText: Copyright (c) 2026 The peakmem Authors
// SPDX-License-Identifier: Apache-2.0

// Evaluation formulas for comparing predictions with measured runs. Round 1
// runs the task with the device's full memory; round 2 caps the task at
// initial memory + predicted peak.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "peakmem/common.hpp"

namespace peakmem {

// Strictly greater: a prediction equal to the capacity still fits.
bool predict_oom(Bytes predicted_peak, Bytes capacity) noexcept;

bool correctness_round1(bool predicted_oom, bool actual_oom) noexcept;
bool correctness_round2(bool c1, bool oom1, bool oom2) noexcept;

// |predicted - actual| / actual. Throws InvalidArgument when actual is 0.
double relative_error(Bytes predicted, Bytes actual);

enum class Quadrant { Optimal, Underestimation, Overestimation, Worst };
std::string_view to_string(Quadrant q) noexcept;

inline constexpr double kFailureWeight = 0.7;
inline constexpr double kErrorWeight = 0.3;
inline constexpr double kQuadrantThreshold = 0.2;

Quadrant quadrant(double failure_probability, double median_error) noexcept;

struct RunOutcome {
  bool correct = false;
  std::optional<double> error;  // absent when the run produced no peak to compare
};

struct AggregateMetrics {
  std::size_t run_count = 0;
  std::size_t error_count = 0;
  double failure_probability = 0;
  double median_error = 0;
  double performance_score = 0;
  Quadrant quadrant = Quadrant::Optimal;
};

// Median over present errors; even counts average the central pair. Throws
// EmptyInput.
AggregateMetrics aggregate(std::span<const RunOutcome> runs);

// capacity - predicted, capacity, or -capacity.
std::int64_t memory_saved(Bytes capacity, Bytes predicted_peak, bool c1, bool oom1, bool oom2) noexcept;

// Throws EmptyInput.
double avg_memory_saved(std::span<const std::int64_t> savings);

// Joins the reports in `reports_dir` (*.json, one per config and estimator)
// with measured records and returns metrics JSON.
std::string evaluate(const std::filesystem::path& reports_dir, const std::filesystem::path& actuals);

}  // namespace peakmem
