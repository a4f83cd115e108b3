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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "faded/errors.hpp"
#include "faded/sketch.hpp"

namespace faded {

// Sketch wire image, little-endian throughout:
//
//   magic  u32   "FSK1"
//   version u32
//   depth  u32
//   width  u32
//   seed   u64
//   kind   u8
//   param  f64   decay rate / exponent (0 for no decay)
//   landmark f64
//   scale_epoch u32
//   local_count f64
//   cells  depth*width * 2 * (item u64, freq f64), row-major
//
// Deserializing a serialized sketch reproduces it bit for bit.

inline constexpr uint32_t kWireMagic = 0x314b5346u;  // "FSK1"
inline constexpr uint32_t kWireVersion = 1;
inline constexpr size_t kWireHeaderBytes = 53;
inline constexpr size_t kWireCounterBytes = 16;

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
}

inline void put_f64(std::vector<uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

class Cursor {
 public:
  explicit Cursor(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(size_t n) {
    if (remaining() < n) {
      throw FormatError("sketch image truncated");
    }
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace detail

class WireCodec {
 public:
  static std::vector<uint8_t> serialize(const Sketch& sketch) {
    std::vector<uint8_t> out;
    const size_t cell_count = static_cast<size_t>(sketch.depth()) * sketch.width();
    out.reserve(kWireHeaderBytes + cell_count * 2 * kWireCounterBytes);
    detail::put_u32(out, kWireMagic);
    detail::put_u32(out, kWireVersion);
    detail::put_u32(out, sketch.depth());
    detail::put_u32(out, sketch.width());
    detail::put_u64(out, sketch.seed());
    out.push_back(static_cast<uint8_t>(sketch.decay().kind));
    detail::put_f64(out, sketch.decay().param);
    detail::put_f64(out, sketch.decay().landmark);
    detail::put_u32(out, sketch.scale_epoch());
    detail::put_f64(out, sketch.local_count());
    for (const CellSummary& cell : sketch.cells_) {
      for (const Counter& c : cell.counters()) {
        detail::put_u64(out, c.item);
        detail::put_f64(out, c.freq);
      }
    }
    return out;
  }

  static Sketch deserialize(std::span<const uint8_t> bytes) {
    detail::Cursor in(bytes);
    if (in.u32() != kWireMagic) {
      throw FormatError("bad sketch magic");
    }
    if (in.u32() != kWireVersion) {
      throw FormatError("unsupported sketch version");
    }
    const uint32_t depth = in.u32();
    const uint32_t width = in.u32();
    if (depth == 0 || width == 0 ||
        static_cast<uint64_t>(depth) * width > 100'000'000ull) {
      throw FormatError("implausible sketch dimensions");
    }
    const uint64_t seed = in.u64();
    const uint8_t kind_byte = in.u8();
    if (kind_byte > 2) {
      throw FormatError("unknown decay kind");
    }
    const auto kind = static_cast<DecayKind>(kind_byte);
    const double param = in.f64();
    if (!std::isfinite(param) || param < 0.0 ||
        (kind == DecayKind::none && param != 0.0)) {
      throw FormatError("invalid decay parameter");
    }
    const double landmark = in.f64();
    if (!std::isfinite(landmark)) {
      throw FormatError("invalid landmark");
    }
    const uint32_t epoch = in.u32();
    if (epoch != 0 && (kind != DecayKind::exponential || param == 0.0)) {
      throw FormatError("scale epoch requires exponential decay");
    }
    if (epoch > 1'000'000) {
      throw FormatError("implausible scale epoch");
    }
    const double local_count = in.f64();
    if (!std::isfinite(local_count) || local_count < 0.0 || std::signbit(local_count)) {
      throw FormatError("invalid local count");
    }
    const size_t cell_count = static_cast<size_t>(depth) * width;
    if (in.remaining() != cell_count * 2 * kWireCounterBytes) {
      throw FormatError("sketch image size mismatch");
    }

    SketchConfig config;
    config.seed = seed;
    config.decay = DecaySpec{kind, param, landmark};
    Sketch sketch(config, SketchDims{depth, width});
    for (CellSummary& cell : sketch.cells_) {
      Counter slots[2];
      for (Counter& c : slots) {
        c.item = in.u64();
        c.freq = in.f64();
        if (!std::isfinite(c.freq) || c.freq < 0.0 || (c.freq == 0.0 && std::signbit(c.freq))) {
          throw FormatError("invalid counter frequency");
        }
        if (c.freq == 0.0 && c.item != kEmptySlot) {
          throw FormatError("unoccupied counter carries an item");
        }
        if (c.freq > 0.0 && c.item == kEmptySlot) {
          throw FormatError("occupied counter without an item");
        }
      }
      if (slots[0].occupied() && slots[1].occupied() && slots[0].item == slots[1].item) {
        throw FormatError("duplicate item within a cell");
      }
      cell = CellSummary::from_counters(slots[0], slots[1]);
    }
    sketch.local_count_ = local_count;
    sketch.scale_epoch_ = epoch;
    for (uint32_t e = 0; e < epoch; ++e) {
      sketch.current_landmark_ += sketch.rebase_step();
    }

    // A consistent image keeps every row's counter sum equal to the local
    // count up to summation order.
    for (uint32_t row = 0; row < depth; ++row) {
      const double sum = sketch.row_sum(row);
      if (std::abs(sum - local_count) > 1e-6 * std::max(1.0, local_count)) {
        throw FormatError("row totals disagree with local count");
      }
    }
    return sketch;
  }
};

inline std::vector<uint8_t> serialize(const Sketch& sketch) {
  return WireCodec::serialize(sketch);
}

inline Sketch deserialize(std::span<const uint8_t> bytes) {
  return WireCodec::deserialize(bytes);
}

}  // namespace faded
