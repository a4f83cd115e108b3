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

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "faded/decay.hpp"
#include "faded/sketch.hpp"

namespace faded {

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Exact per-item decayed counts, used as ground truth when scoring sketch
// output. Accumulation is compensated so the totals stay trustworthy even
// against millions of tiny weights.
class ExactOracle {
 public:
  ExactOracle(std::span<const StreamRecord> records, const DecaySpec& decay)
      : decay_(decay) {
    counts_.reserve(records.size() / 8 + 16);
    for (const StreamRecord& rec : records) {
      const double w = raw_weight(decay, rec.timestamp);
      counts_[rec.item].add(w);
      total_.add(w);
    }
  }

  const DecaySpec& decay() const { return decay_; }

  double total_raw() const { return total_.sum; }

  double raw(uint64_t item) const {
    const auto it = counts_.find(item);
    return it == counts_.end() ? 0.0 : it->second.sum;
  }

  double normalized(uint64_t item, double t) const {
    return normalize(decay_, raw(item), t);
  }

  double normalized_total(double t) const {
    return normalize(decay_, total_raw(), t);
  }

  size_t distinct_items() const { return counts_.size(); }

  // Exactly the items whose decayed frequency exceeds phi * C(t),
  // ascending by item id, with normalized frequencies attached.
  std::vector<HeavyHitterEntry> heavy_hitters(double phi, double t) const {
    std::vector<HeavyHitterEntry> out;
    const double threshold = phi * total_raw();
    for (const auto& [item, acc] : counts_) {
      if (acc.sum > threshold) {
        out.push_back({item, normalize(decay_, acc.sum, t)});
      }
    }
    std::sort(out.begin(), out.end(),
              [](const HeavyHitterEntry& a, const HeavyHitterEntry& b) {
                return a.item < b.item;
              });
    return out;
  }

  const std::unordered_map<uint64_t, KahanSum>& items() const { return counts_; }

 private:
  DecaySpec decay_;
  std::unordered_map<uint64_t, KahanSum> counts_;
  KahanSum total_;
};

}  // namespace faded
