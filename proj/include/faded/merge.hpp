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
#include <cstdint>
#include <stdexcept>

#include "faded/sketch.hpp"
#include "faded/summary.hpp"

namespace faded {

// Cell-wise merge of two sketches built over disjoint sub-streams.
//
// Combining two cells first assigns every monitored item a joined
// frequency: items present on both sides get the sum of their counters,
// items present on one side get their counter plus the other side's
// minimum frequency. Truncating the result back to the two largest entries
// then discards exactly the surplus the one-sided adjustments introduced,
// so the kept counters still sum to the total weight both cells absorbed.
// That identity is specific to two-counter cells; it is why the cell size
// is fixed.

struct CombinedSummary {
  std::array<Counter, 4> entries{};  // ascending by (freq, item)
  int size = 0;
};

inline CombinedSummary combine_cell(const CellSummary& s1, const CellSummary& s2) {
  const double min1 = s1.min_freq();
  const double min2 = s2.min_freq();
  CombinedSummary combined;
  auto push = [&combined](uint64_t item, double freq) {
    combined.entries[combined.size++] = {item, freq};
  };
  for (const Counter& c : s1.counters()) {
    if (!c.occupied()) {
      continue;
    }
    const auto other = s2.find(c.item);
    push(c.item, other ? c.freq + other->freq : c.freq + min2);
  }
  for (const Counter& c : s2.counters()) {
    if (!c.occupied() || s1.find(c.item)) {
      continue;
    }
    push(c.item, c.freq + min1);
  }
  std::sort(combined.entries.begin(), combined.entries.begin() + combined.size,
            [](const Counter& a, const Counter& b) {
              if (a.freq != b.freq) {
                return a.freq < b.freq;
              }
              return a.item < b.item;
            });
  return combined;
}

// Keep the two largest entries (ties resolved toward larger item ids by the
// ascending sort order).
inline CellSummary purge(const CombinedSummary& combined) {
  if (combined.size <= 2) {
    Counter low = combined.size > 0 ? combined.entries[0] : Counter{};
    Counter high = combined.size > 1 ? combined.entries[1] : Counter{};
    return CellSummary::from_counters(low, high);
  }
  return CellSummary::from_counters(combined.entries[combined.size - 2],
                                    combined.entries[combined.size - 1]);
}

inline void check_mergeable(const Sketch& a, const Sketch& b) {
  if (a.dims() != b.dims()) {
    throw std::invalid_argument("cannot merge sketches with different dimensions");
  }
  if (a.seed() != b.seed()) {
    throw std::invalid_argument("cannot merge sketches with different hash seeds");
  }
  if (!(a.decay() == b.decay())) {
    throw std::invalid_argument("cannot merge sketches with different decay settings");
  }
  if (a.scale_epoch() != b.scale_epoch()) {
    throw std::invalid_argument("cannot merge sketches from different scale epochs");
  }
}

// Pure binary merge; inputs are left untouched so reduction trees can reuse
// operands.
inline Sketch merge_sketch(const Sketch& a, const Sketch& b) {
  check_mergeable(a, b);
  Sketch merged = a;
  for (uint32_t row = 0; row < a.depth(); ++row) {
    for (uint32_t col = 0; col < a.width(); ++col) {
      merged.set_cell(row, col, purge(combine_cell(a.cell(row, col), b.cell(row, col))));
    }
  }
  merged.set_local_count(a.local_count() + b.local_count());
  return merged;
}

}  // namespace faded
