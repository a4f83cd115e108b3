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
#include <vector>

#include "faded/sketch.hpp"

namespace faded::testing {

// Test-only mirror of the grid update and point-estimate path, run entirely
// in long double with no overflow guard and a fixed landmark. Exponential
// weights up to roughly e^11000 stay representable, so streams that force
// the production sketch through several landmark rebases can be checked
// against this directly.
class ReferenceSketch {
 public:
  explicit ReferenceSketch(const Sketch& shape)
      : depth_(shape.depth()),
        width_(shape.width()),
        lambda_(shape.decay().param),
        landmark_(shape.decay().landmark),
        hashes_(shape.hash_params()),
        cells_(static_cast<size_t>(depth_) * width_) {}

  void process(uint64_t item, double t) {
    const long double w = expl(static_cast<long double>(lambda_) * (t - landmark_));
    count_ += w;
    for (uint32_t row = 0; row < depth_; ++row) {
      const uint32_t col = hash_bucket(hashes_[row], item, width_);
      update(cells_[static_cast<size_t>(row) * width_ + col], item, w);
    }
  }

  long double raw_estimate(uint64_t item) const {
    long double answer = std::numeric_limits<long double>::infinity();
    for (uint32_t row = 0; row < depth_; ++row) {
      const uint32_t col = hash_bucket(hashes_[row], item, width_);
      const Cell& cell = cells_[static_cast<size_t>(row) * width_ + col];
      long double value = min_freq(cell);
      for (const Slot& slot : cell) {
        if (slot.freq > 0.0L && slot.item == item) {
          value = slot.freq;
        }
      }
      answer = std::min(answer, value);
    }
    return answer;
  }

  double normalized_estimate(uint64_t item, double t) const {
    const long double g = expl(static_cast<long double>(lambda_) * (t - landmark_));
    return static_cast<double>(raw_estimate(item) / g);
  }

  long double count() const { return count_; }

 private:
  struct Slot {
    uint64_t item = kEmptySlot;
    long double freq = 0.0L;
  };
  using Cell = std::array<Slot, 2>;

  static long double min_freq(const Cell& cell) {
    if (cell[0].freq <= 0.0L || cell[1].freq <= 0.0L) {
      return 0.0L;
    }
    return std::min(cell[0].freq, cell[1].freq);
  }

  static void update(Cell& cell, uint64_t item, long double w) {
    for (Slot& slot : cell) {
      if (slot.freq > 0.0L && slot.item == item) {
        slot.freq += w;
        return;
      }
    }
    for (Slot& slot : cell) {
      if (slot.freq <= 0.0L) {
        slot = {item, w};
        return;
      }
    }
    Slot& victim = cell[0].freq != cell[1].freq
                       ? (cell[0].freq < cell[1].freq ? cell[0] : cell[1])
                       : (cell[0].item < cell[1].item ? cell[0] : cell[1]);
    victim.freq += w;
    victim.item = item;
  }

  uint32_t depth_;
  uint32_t width_;
  double lambda_;
  double landmark_;
  std::vector<HashParams> hashes_;
  std::vector<Cell> cells_;
  long double count_ = 0.0L;
};

}  // namespace faded::testing
