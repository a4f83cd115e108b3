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

#include "faded/summary.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <map>
#include <vector>

#include "faded/hash.hpp"

using namespace faded;
using Catch::Matchers::WithinRel;

TEST_CASE("updates fill, accumulate, and evict") {
  CellSummary s;
  s.update(7, 2.5);
  CHECK(s.find(7)->freq == 2.5);
  CHECK(s.occupied_count() == 1);

  s.update(3, 1.0);
  s.update(7, 1.5);
  CHECK(s.find(7)->freq == 4.0);
  CHECK(s.find(3)->freq == 1.0);

  // new item inherits the minimum counter
  s.update(9, 0.5);
  CHECK(!s.find(3).has_value());
  CHECK(s.find(9)->freq == 1.5);
  CHECK(s.find(7)->freq == 4.0);
}

TEST_CASE("minimum frequency needs both counters occupied") {
  CellSummary s;
  CHECK(s.min_freq() == 0.0);
  s.update(7, 4.0);
  CHECK(s.min_freq() == 0.0);
  s.update(3, 1.0);
  CHECK(s.min_freq() == 1.0);
}

TEST_CASE("maximum counter and its tie break") {
  CellSummary empty;
  CHECK(!empty.max_counter().has_value());

  CellSummary s;
  s.update(7, 4.0);
  CHECK(s.max_counter()->item == 7);
  s.update(3, 1.0);
  CHECK(s.max_counter()->item == 7);
  CHECK(s.max_counter()->freq == 4.0);

  CellSummary tied;
  tied.update(7, 4.0);
  tied.update(3, 4.0);
  CHECK(tied.max_counter()->item == 7);
}

TEST_CASE("exhaustive two-counter ties") {
  // all orderings of two equal-frequency inserts agree with the rule:
  // larger item id wins the maximum
  for (uint64_t first : {1, 9}) {
    const uint64_t second = first == 1 ? 9 : 1;
    CellSummary s;
    s.update(first, 2.0);
    s.update(second, 2.0);
    CHECK(s.max_counter()->item == 9);
  }
}

TEST_CASE("eviction tie removes the smaller item id") {
  CellSummary s;
  s.update(4, 2.0);
  s.update(6, 2.0);
  s.update(10, 1.0);
  CHECK(!s.find(4).has_value());
  CHECK(s.find(6).has_value());
  CHECK(s.find(10)->freq == 3.0);
}

TEST_CASE("zero weight leaves the summary untouched") {
  CellSummary s;
  s.update(5, 0.0);
  CHECK(s.occupied_count() == 0);
  s.update(5, 1.0);
  s.update(8, 0.0);
  CHECK(s.occupied_count() == 1);
  CHECK(s.sum() == 1.0);
}

TEST_CASE("negative and NaN weights are rejected") {
  CellSummary s;
  CHECK_THROWS_AS(s.update(5, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(s.update(5, std::nan("")), std::invalid_argument);
}

TEST_CASE("weight conservation over random update sequences") {
  uint64_t rng = 888;
  for (int trial = 0; trial < 50; ++trial) {
    CellSummary s;
    double fed = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const uint64_t item = splitmix64(rng) % 17;
      const double weight = static_cast<double>(splitmix64(rng) % 1000) / 64.0;
      s.update(item, weight);
      fed += weight;
    }
    CHECK_THAT(s.sum(), WithinRel(fed, 1e-9));
    CHECK(s.min_freq() <= s.sum() / 2.0 + 1e-12);
  }
}

TEST_CASE("estimates bound the exact counts from above") {
  uint64_t rng = 4242;
  for (int trial = 0; trial < 30; ++trial) {
    CellSummary s;
    std::map<uint64_t, double> exact;
    const int records = 1 + static_cast<int>(splitmix64(rng) % 10000);
    const uint64_t universe = 1 + splitmix64(rng) % 40;
    for (int i = 0; i < records; ++i) {
      const uint64_t item = 1 + splitmix64(rng) % universe;
      const double weight = static_cast<double>(1 + splitmix64(rng) % 64) / 8.0;
      s.update(item, weight);
      exact[item] += weight;
    }
    const double min_freq = s.min_freq();
    for (const auto& [item, f] : exact) {
      const auto monitored = s.find(item);
      if (monitored) {
        CHECK(f <= monitored->freq + 1e-9);
        CHECK(monitored->freq - min_freq <= f + 1e-9);
      } else {
        CHECK(f <= min_freq + 1e-9);
      }
    }
  }
}
