// Copyright 2026 The Faded Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "faded/oracle.hpp"
#include "faded/sketch.hpp"

namespace faded {

// One scored experiment cell. Timing fields are marked below and excluded
// from determinism comparisons.
struct MetricsRow {
  // cell parameters
  uint64_t n = 0;
  uint64_t m = 0;
  double rho = 0.0;
  double phi = 0.0;
  uint32_t width = 0;
  uint32_t depth = 0;
  int workers = 0;
  uint64_t seed = 0;
  int repetition = 0;
  std::string stat = "run";  // run | mean | min | max

  // accuracy
  size_t exact_count = 0;
  size_t reported_count = 0;
  size_t true_positives = 0;
  double precision = 1.0;
  double recall = 1.0;
  double abs_err_mean = 0.0;
  double abs_err_max = 0.0;
  double are_mean = 0.0;
  double are_max = 0.0;

  // timing (non-deterministic)
  double updates_per_ms = 0.0;
  double ingest_ms = 0.0;
};

// Column names, in emission order. The trailing columns listed in
// kTimingColumns vary run to run and are skipped by golden comparisons.
inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "n",         "m",           "rho",         "phi",        "width",
      "depth",     "workers",     "seed",        "rep",        "stat",
      "exact",     "reported",    "true_pos",    "precision",  "recall",
      "abs_err_mean", "abs_err_max", "are_mean", "are_max",
      "updates_per_ms", "ingest_ms"};
  return cols;
}

inline const std::vector<std::string>& timing_columns() {
  static const std::vector<std::string> cols = {"updates_per_ms", "ingest_ms"};
  return cols;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string metrics_csv_header() {
  std::string out;
  const auto& cols = metrics_columns();
  for (size_t i = 0; i < cols.size(); ++i) {
    out += cols[i];
    out += (i + 1 < cols.size()) ? ',' : '\n';
  }
  return out;
}

inline std::string to_csv(const MetricsRow& row) {
  std::string out;
  auto field = [&out](const std::string& v) {
    out += v;
    out += ',';
  };
  field(std::to_string(row.n));
  field(std::to_string(row.m));
  field(format_double(row.rho));
  field(format_double(row.phi));
  field(std::to_string(row.width));
  field(std::to_string(row.depth));
  field(std::to_string(row.workers));
  field(std::to_string(row.seed));
  field(std::to_string(row.repetition));
  field(row.stat);
  field(std::to_string(row.exact_count));
  field(std::to_string(row.reported_count));
  field(std::to_string(row.true_positives));
  field(format_double(row.precision));
  field(format_double(row.recall));
  field(format_double(row.abs_err_mean));
  field(format_double(row.abs_err_max));
  field(format_double(row.are_mean));
  field(format_double(row.are_max));
  field(format_double(row.updates_per_ms));
  out += format_double(row.ingest_ms);
  out += '\n';
  return out;
}

// Precision, recall, absolute error, and average relative error of a
// report against the exact oracle. An empty report has no false positives
// (precision 1); an empty exact set cannot be missed (recall 1).
inline MetricsRow score(const HeavyHitterReport& report, const ExactOracle& oracle,
                        double phi, double t) {
  MetricsRow row;
  row.phi = phi;
  const auto exact = oracle.heavy_hitters(phi, t);
  std::unordered_set<uint64_t> exact_items;
  exact_items.reserve(exact.size());
  for (const auto& e : exact) {
    exact_items.insert(e.item);
  }
  row.exact_count = exact.size();
  row.reported_count = report.entries.size();
  size_t hits = 0;
  double abs_sum = 0.0;
  double are_sum = 0.0;
  for (const auto& entry : report.entries) {
    hits += exact_items.contains(entry.item) ? 1 : 0;
    const double exact_freq = oracle.normalized(entry.item, t);
    const double abs_err = std::abs(entry.frequency - exact_freq);
    abs_sum += abs_err;
    row.abs_err_max = std::max(row.abs_err_max, abs_err);
    if (exact_freq > 0.0) {
      const double rel = abs_err / exact_freq;
      are_sum += rel;
      row.are_max = std::max(row.are_max, rel);
    }
  }
  row.true_positives = hits;
  row.precision = report.entries.empty()
                      ? 1.0
                      : static_cast<double>(hits) / static_cast<double>(report.entries.size());
  row.recall = exact.empty() ? 1.0
                             : static_cast<double>(hits) / static_cast<double>(exact.size());
  if (!report.entries.empty()) {
    abs_sum /= static_cast<double>(report.entries.size());
    are_sum /= static_cast<double>(report.entries.size());
  }
  row.abs_err_mean = abs_sum;
  row.are_mean = are_sum;
  return row;
}

inline double updates_per_ms(size_t records, double elapsed_ms) {
  if (!(elapsed_ms > 0.0)) {
    throw std::invalid_argument("elapsed time must be positive");
  }
  return static_cast<double>(records) / elapsed_ms;
}

}  // namespace faded
