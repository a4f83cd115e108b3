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
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

namespace faded {

// Item id reserved for an unoccupied counter slot. Occupancy itself is
// judged solely by freq > 0.
inline constexpr uint64_t kEmptySlot = std::numeric_limits<uint64_t>::max();

struct Counter {
  uint64_t item = kEmptySlot;
  double freq = 0.0;

  bool occupied() const { return freq > 0.0; }

  friend bool operator==(const Counter&, const Counter&) = default;
};

// Two-counter frequency summary with the evict-and-inherit-minimum update
// rule. The sum of the two counters always equals the total weight ever fed
// into the summary, which is what makes a grid of these cells interchangeable
// with a grid of plain counters when only totals are of interest.
class CellSummary {
 public:
  // Feed one occurrence of `item` carrying non-negative `weight`.
  // Monitored items accumulate; otherwise a free slot is taken; otherwise
  // the minimum counter absorbs the weight and switches to `item`.
  // On an eviction tie the smaller item id is evicted.
  void update(uint64_t item, double weight) {
    if (!(weight >= 0.0)) {
      throw std::invalid_argument("update weight must be non-negative");
    }
    if (weight == 0.0) {
      return;
    }
    for (Counter& c : slots_) {
      if (c.occupied() && c.item == item) {
        c.freq += weight;
        return;
      }
    }
    for (Counter& c : slots_) {
      if (!c.occupied()) {
        c = Counter{item, weight};
        return;
      }
    }
    Counter& victim = evict_slot();
    victim.freq += weight;
    victim.item = item;
  }

  // Minimum frequency; zero whenever fewer than two counters are occupied.
  double min_freq() const {
    if (!slots_[0].occupied() || !slots_[1].occupied()) {
      return 0.0;
    }
    return std::min(slots_[0].freq, slots_[1].freq);
  }

  // Occupied counter with the largest frequency, larger item id on ties.
  // Empty cells have no candidate.
  std::optional<Counter> max_counter() const {
    const bool o0 = slots_[0].occupied();
    const bool o1 = slots_[1].occupied();
    if (!o0 && !o1) {
      return std::nullopt;
    }
    if (o0 != o1) {
      return o0 ? slots_[0] : slots_[1];
    }
    if (slots_[0].freq != slots_[1].freq) {
      return slots_[0].freq > slots_[1].freq ? slots_[0] : slots_[1];
    }
    return slots_[0].item > slots_[1].item ? slots_[0] : slots_[1];
  }

  double sum() const { return slots_[0].freq + slots_[1].freq; }

  std::optional<Counter> find(uint64_t item) const {
    for (const Counter& c : slots_) {
      if (c.occupied() && c.item == item) {
        return c;
      }
    }
    return std::nullopt;
  }

  int occupied_count() const {
    return static_cast<int>(slots_[0].occupied()) +
           static_cast<int>(slots_[1].occupied());
  }

  const std::array<Counter, 2>& counters() const { return slots_; }

  void scale(double multiplier) {
    slots_[0].freq *= multiplier;
    slots_[1].freq *= multiplier;
  }

  static CellSummary from_counters(Counter low, Counter high) {
    CellSummary s;
    s.slots_[0] = low.occupied() ? low : Counter{};
    s.slots_[1] = high.occupied() ? high : Counter{};
    return s;
  }

  // Slot order is an implementation artifact; cells compare as counter sets.
  friend bool operator==(const CellSummary& a, const CellSummary& b) {
    return a.canonical() == b.canonical();
  }

  std::array<Counter, 2> canonical() const {
    std::array<Counter, 2> c = slots_;
    for (Counter& slot : c) {
      if (!slot.occupied()) {
        slot = Counter{};
      }
    }
    if (!c[0].occupied() || (c[1].occupied() && c[1].item < c[0].item)) {
      std::swap(c[0], c[1]);
    }
    return c;
  }

 private:
  Counter& evict_slot() {
    if (slots_[0].freq != slots_[1].freq) {
      return slots_[0].freq < slots_[1].freq ? slots_[0] : slots_[1];
    }
    return slots_[0].item < slots_[1].item ? slots_[0] : slots_[1];
  }

  std::array<Counter, 2> slots_{};
};

}  // namespace faded
