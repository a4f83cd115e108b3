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
#include <vector>

namespace faded {

// Pairwise independent bucket hashing: h(x) = ((a*x + b) mod P) mod width
// with P = 2^61 - 1, a in [1, P), b in [0, P). Parameters are drawn from a
// splitmix64 stream so that a given seed reproduces the same functions on
// any platform.

inline constexpr uint64_t kMersenne61 = (uint64_t{1} << 61) - 1;

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// x mod (2^61 - 1) for x < 2^125, via 2^61 = 1 (mod P) folding.
inline uint64_t mod_mersenne61(unsigned __int128 x) {
  const uint64_t lo = static_cast<uint64_t>(x) & kMersenne61;
  const uint64_t hi = static_cast<uint64_t>(x >> 61);
  uint64_t s = lo + (hi & kMersenne61) + (hi >> 61);
  while (s >= kMersenne61) {
    s -= kMersenne61;
  }
  return s;
}

struct HashParams {
  uint64_t a = 1;
  uint64_t b = 0;

  friend bool operator==(const HashParams&, const HashParams&) = default;
};

inline std::vector<HashParams> make_hash_params(uint64_t seed, uint32_t rows) {
  std::vector<HashParams> params;
  params.reserve(rows);
  uint64_t state = seed;
  auto draw_below = [&state](uint64_t bound) {
    // 61-bit rejection sampling keeps the draw unbiased.
    for (;;) {
      const uint64_t candidate = splitmix64(state) >> 3;
      if (candidate < bound) {
        return candidate;
      }
    }
  };
  for (uint32_t j = 0; j < rows; ++j) {
    HashParams hp;
    hp.a = 1 + draw_below(kMersenne61 - 1);
    hp.b = draw_below(kMersenne61);
    params.push_back(hp);
  }
  return params;
}

inline uint32_t hash_bucket(const HashParams& hp, uint64_t item, uint32_t width) {
  const unsigned __int128 mixed =
      static_cast<unsigned __int128>(hp.a) * item + hp.b;
  return static_cast<uint32_t>(mod_mersenne61(mixed) % width);
}

}  // namespace faded
