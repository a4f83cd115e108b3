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
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "faded/decay.hpp"
#include "faded/errors.hpp"
#include "faded/hash.hpp"
#include "faded/summary.hpp"

namespace faded {

struct StreamRecord {
  uint64_t item = 0;
  double timestamp = 0.0;

  friend bool operator==(const StreamRecord&, const StreamRecord&) = default;
};

struct SketchConfig {
  double epsilon = 0.0;  // estimation error; 0 means "derived from width"
  double delta = 0.0;    // failure probability; 0 means "derived from depth"
  double phi = std::numeric_limits<double>::quiet_NaN();  // support threshold
  uint64_t seed = 0;
  DecaySpec decay{};
};

struct SketchDims {
  uint32_t depth = 0;  // rows, one hash function each
  uint32_t width = 0;  // columns per row

  friend bool operator==(const SketchDims&, const SketchDims&) = default;
};

// depth = ceil(ln 1/delta), width = ceil(e / (2 epsilon)). The factor two
// reflects the two counters held per cell.
inline SketchDims dims_from_params(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw ConfigError("epsilon must lie in (0, 1)");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw ConfigError("delta must lie in (0, 1)");
  }
  SketchDims dims;
  dims.depth = static_cast<uint32_t>(std::ceil(std::log(1.0 / delta)));
  dims.depth = std::max(dims.depth, 1u);
  const double columns = std::ceil(std::numbers::e / (2.0 * epsilon));
  if (!(columns < 1e8)) {
    throw ConfigError("epsilon too small, sketch would not fit in memory");
  }
  dims.width = static_cast<uint32_t>(columns);
  return dims;
}

struct HeavyHitterEntry {
  uint64_t item = 0;
  double frequency = 0.0;  // normalized estimated decayed frequency

  friend bool operator==(const HeavyHitterEntry&, const HeavyHitterEntry&) = default;
};

struct HeavyHitterReport {
  std::vector<HeavyHitterEntry> entries;  // distinct items, ascending by id
  double query_time = 0.0;
  double normalized_total = 0.0;
};

// Count-min grid whose cells are two-counter summaries instead of plain
// counters. Ingestion adds the non-normalized decayed weight of each record
// to one cell per row; point queries take the minimum over rows and only
// normalize at the end. The per-row counter sums all equal the total
// ingested weight, exactly as a plain count-min row would.
class Sketch {
 public:
  explicit Sketch(const SketchConfig& config)
      : Sketch(config, dims_from_params(config.epsilon, config.delta)) {}

  Sketch(const SketchConfig& config, SketchDims dims)
      : config_(config),
        dims_(dims),
        hashes_(make_hash_params(config.seed, dims.depth)),
        cells_(static_cast<size_t>(dims.depth) * dims.width),
        current_landmark_(config.decay.landmark) {
    if (dims.depth == 0 || dims.width == 0) {
      throw ConfigError("sketch dimensions must be positive");
    }
    if (static_cast<uint64_t>(dims.depth) * dims.width > 100'000'000ull) {
      throw ConfigError("sketch dimensions too large");
    }
    if (!std::isnan(config.phi)) {
      if (!(config.phi > 0.0) || !(config.phi < 1.0)) {
        throw ConfigError("phi must lie in (0, 1)");
      }
      if (config.epsilon > 0.0 && !(config.epsilon < config.phi)) {
        throw ConfigError("epsilon must be smaller than phi");
      }
    }
  }

  uint32_t depth() const { return dims_.depth; }
  uint32_t width() const { return dims_.width; }
  SketchDims dims() const { return dims_; }
  uint64_t seed() const { return config_.seed; }
  const DecaySpec& decay() const { return config_.decay; }
  const SketchConfig& config() const { return config_; }
  uint32_t scale_epoch() const { return scale_epoch_; }
  double current_landmark() const { return current_landmark_; }
  double local_count() const { return local_count_; }
  ScaledWeight local_count_scaled() const { return {local_count_, scale_epoch_}; }

  // Tightest error parameter the grid supports: e / (2 width).
  double epsilon() const { return std::numbers::e / (2.0 * dims_.width); }
  // Failure probability implied by the row count: exp(-depth).
  double delta() const { return std::exp(-static_cast<double>(dims_.depth)); }
  double phi() const { return config_.phi; }

  uint32_t hash(uint32_t row, uint64_t item) const {
    return hash_bucket(hashes_[row], item, dims_.width);
  }
  const std::vector<HashParams>& hash_params() const { return hashes_; }

  const CellSummary& cell(uint32_t row, uint32_t col) const {
    return cells_[static_cast<size_t>(row) * dims_.width + col];
  }

  double row_sum(uint32_t row) const {
    double total = 0.0;
    for (uint32_t col = 0; col < dims_.width; ++col) {
      total += cell(row, col).sum();
    }
    return total;
  }

  // Ingest one record, rescaling to a later landmark whenever the weight or
  // the running count would cross the overflow guard. Only exponential decay
  // can rescale; the other kinds fail hard at the guard.
  void process(const StreamRecord& record) {
    while (!process_or_signal(record)) {
      if (!can_rebase()) {
        throw std::overflow_error("decayed count exceeds overflow guard and cannot be rebased");
      }
      apply_rebase();
    }
  }

  // Single ingestion attempt; returns false (leaving the sketch untouched)
  // when a rebase must happen first. Lets a coordinated harness decide when
  // the rescale is applied.
  bool process_or_signal(const StreamRecord& record) {
    if (record.item == kEmptySlot) {
      throw std::invalid_argument("item id is reserved");
    }
    if (!std::isfinite(record.timestamp) || !(record.timestamp >= config_.decay.landmark)) {
      throw std::domain_error("record timestamp precedes landmark");
    }
    const double x = weight_at_current_landmark(record.timestamp);
    if (!(x < kOverflowGuard) || !(local_count_ + x < kOverflowGuard)) {
      return false;
    }
    local_count_ += x;
    for (uint32_t row = 0; row < dims_.depth; ++row) {
      const uint32_t col = hash(row, record.item);
      cells_[static_cast<size_t>(row) * dims_.width + col].update(record.item, x);
    }
    return true;
  }

  // Advance the landmark by one fixed step and rescale all stored state.
  // Normalized query results are unchanged.
  void apply_rebase() {
    DecaySpec at_current = config_.decay;
    at_current.landmark = current_landmark_;
    const double next_landmark = current_landmark_ + rebase_step();
    const double m = rebase_multiplier(at_current, next_landmark);
    for (CellSummary& cell : cells_) {
      cell.scale(m);
    }
    local_count_ *= m;
    current_landmark_ = next_landmark;
    ++scale_epoch_;
  }

  bool can_rebase() const {
    return config_.decay.kind == DecayKind::exponential && config_.decay.param != 0.0;
  }

  // Landmark advance per rebase; chosen so one step divides stored values
  // by the overflow guard.
  double rebase_step() const {
    if (config_.decay.kind != DecayKind::exponential || config_.decay.param == 0.0) {
      throw ConfigError("rebase step undefined for non-decaying sketches");
    }
    return std::log(kOverflowGuard) / config_.decay.param;
  }

  // Normalized estimated decayed frequency of `item` at query time t:
  // minimum over rows of the item's counter (or the cell minimum when the
  // item is not monitored there), divided by g(t - L).
  double point_estimate(uint64_t item, double t) const {
    double answer = std::numeric_limits<double>::infinity();
    for (uint32_t row = 0; row < dims_.depth; ++row) {
      const CellSummary& c = cell(row, hash(row, item));
      const auto monitored = c.find(item);
      answer = std::min(answer, monitored ? monitored->freq : c.min_freq());
    }
    return normalize_at_current(answer, t);
  }

  HeavyHitterReport query(double t, double global_count_raw) const {
    if (std::isnan(config_.phi)) {
      throw ConfigError("no support threshold configured for this sketch");
    }
    return query(t, global_count_raw, config_.phi);
  }

  // Scan every cell: the larger of its two counters is the only possible
  // majority item of the cell's sub-stream. Candidates above the threshold
  // are confirmed with a full point estimate before being reported.
  HeavyHitterReport query(double t, double global_count_raw, double phi) const {
    if (!(phi > 0.0) || !(phi < 1.0)) {
      throw ConfigError("phi must lie in (0, 1)");
    }
    const double g = growth_at_current(t);
    HeavyHitterReport report;
    report.query_time = t;
    report.normalized_total = global_count_raw / g;
    const double threshold = phi * report.normalized_total;
    std::map<uint64_t, double> found;
    for (const CellSummary& c : cells_) {
      const auto candidate = c.max_counter();
      if (!candidate || !(candidate->freq / g > threshold)) {
        continue;
      }
      if (found.contains(candidate->item)) {
        continue;
      }
      const double p = point_estimate(candidate->item, t);
      if (p > threshold) {
        found.emplace(candidate->item, p);
      }
    }
    report.entries.reserve(found.size());
    for (const auto& [item, p] : found) {
      report.entries.push_back({item, p});
    }
    return report;
  }

  // State equality over everything the wire image carries; requested
  // epsilon/delta/phi are configuration, not state. Counter values compare
  // exactly, cell slot order does not matter.
  friend bool operator==(const Sketch& a, const Sketch& b) {
    return a.dims_ == b.dims_ && a.config_.seed == b.config_.seed &&
           a.config_.decay.kind == b.config_.decay.kind &&
           bits(a.config_.decay.param) == bits(b.config_.decay.param) &&
           bits(a.config_.decay.landmark) == bits(b.config_.decay.landmark) &&
           a.scale_epoch_ == b.scale_epoch_ &&
           bits(a.local_count_) == bits(b.local_count_) && a.cells_ == b.cells_;
  }

  double growth_at_current(double t) const {
    DecaySpec at_current = config_.decay;
    at_current.landmark = current_landmark_;
    if (config_.decay.kind == DecayKind::exponential) {
      return std::exp(config_.decay.param * (t - current_landmark_));
    }
    return growth(at_current, t - current_landmark_);
  }

 private:
  static uint64_t bits(double v) { return std::bit_cast<uint64_t>(v); }

  void set_cell(uint32_t row, uint32_t col, const CellSummary& c) {
    cells_[static_cast<size_t>(row) * dims_.width + col] = c;
  }
  void set_local_count(double v) { local_count_ = v; }

  double weight_at_current_landmark(double t) const {
    // After a rebase the effective landmark may exceed a straggler's
    // timestamp; exponential growth is well defined there.
    if (config_.decay.kind == DecayKind::exponential) {
      return std::exp(config_.decay.param * (t - current_landmark_));
    }
    return growth(config_.decay, t - config_.decay.landmark);
  }

  double normalize_at_current(double raw, double t) const {
    if (!(t >= config_.decay.landmark)) {
      throw std::domain_error("query time precedes landmark");
    }
    if (raw == 0.0) {
      return 0.0;
    }
    return raw / growth_at_current(t);
  }

  friend class WireCodec;
  friend Sketch merge_sketch(const Sketch&, const Sketch&);

  SketchConfig config_;
  SketchDims dims_;
  std::vector<HashParams> hashes_;
  std::vector<CellSummary> cells_;
  double local_count_ = 0.0;
  uint32_t scale_epoch_ = 0;
  double current_landmark_ = 0.0;
};

}  // namespace faded
