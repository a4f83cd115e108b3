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
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "faded/errors.hpp"
#include "faded/hash.hpp"
#include "faded/sketch.hpp"
#include "faded/wire.hpp"

namespace faded {

// Synthetic zipf streams. Item k of m is drawn with probability
// proportional to 1/k^rho; timestamps are either the record index or
// cumulative exponential inter-arrival gaps. Identical specs produce
// identical streams on a given platform.

enum class TimestampModel : uint8_t {
  index = 0,    // t_i = i
  poisson = 1,  // exponential inter-arrival times of the given rate
};

struct ZipfStreamSpec {
  uint64_t n = 0;
  uint64_t m = 1;
  double rho = 1.1;
  uint64_t seed = 1;
  TimestampModel timestamps = TimestampModel::index;
  double arrival_rate = 1.0;
};

class ZipfSampler {
 public:
  ZipfSampler(uint64_t m, double rho) {
    if (m == 0) {
      throw ConfigError("universe size must be positive");
    }
    if (!(rho > 0.0) || !std::isfinite(rho)) {
      throw ConfigError("zipf skew must be positive");
    }
    cdf_.resize(m);
    double total = 0.0;
    for (uint64_t k = 1; k <= m; ++k) {
      total += std::pow(static_cast<double>(k), -rho);
      cdf_[k - 1] = total;
    }
    for (double& v : cdf_) {
      v /= total;
    }
    cdf_.back() = 1.0;
  }

  // Probability of item k (1-based rank).
  double pmf(uint64_t k) const {
    return cdf_[k - 1] - (k > 1 ? cdf_[k - 2] : 0.0);
  }

  uint64_t sample(uint64_t& rng_state) const {
    const double u = to_unit(splitmix64(rng_state));
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<uint64_t>(it - cdf_.begin()) + 1;
  }

  static double to_unit(uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  std::vector<double> cdf_;
};

inline std::vector<StreamRecord> generate(const ZipfStreamSpec& spec) {
  ZipfSampler sampler(spec.m, spec.rho);
  if (spec.timestamps == TimestampModel::poisson && !(spec.arrival_rate > 0.0)) {
    throw ConfigError("arrival rate must be positive");
  }
  std::vector<StreamRecord> records;
  records.reserve(spec.n);
  uint64_t item_state = spec.seed;
  uint64_t gap_state = spec.seed ^ 0x5bf0f3a5b9e4c1d3ULL;
  double clock = 0.0;
  for (uint64_t i = 0; i < spec.n; ++i) {
    StreamRecord rec;
    rec.item = sampler.sample(item_state);
    if (spec.timestamps == TimestampModel::index) {
      rec.timestamp = static_cast<double>(i);
    } else {
      const double u = ZipfSampler::to_unit(splitmix64(gap_state));
      clock += -std::log1p(-u) / spec.arrival_rate;
      rec.timestamp = clock;
    }
    records.push_back(rec);
  }
  return records;
}

// Dataset files: a small header followed by fixed-size records
// (item u64 LE, timestamp f64 LE). CSV ("item,timestamp" lines) is
// accepted for interoperability.

inline constexpr uint32_t kDatasetMagic = 0x31534446u;  // "FDS1"
inline constexpr uint32_t kDatasetVersion = 1;

inline void write_dataset(const std::filesystem::path& path,
                          std::span<const StreamRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot open dataset for writing: " + path.string());
  }
  std::vector<uint8_t> buffer;
  buffer.reserve(16 + records.size() * 16);
  detail::put_u32(buffer, kDatasetMagic);
  detail::put_u32(buffer, kDatasetVersion);
  detail::put_u64(buffer, records.size());
  for (const StreamRecord& rec : records) {
    detail::put_u64(buffer, rec.item);
    detail::put_f64(buffer, rec.timestamp);
  }
  out.write(reinterpret_cast<const char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size()));
  if (!out) {
    throw ConfigError("failed writing dataset: " + path.string());
  }
}

inline std::vector<StreamRecord> read_dataset_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open dataset: " + path.string());
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  detail::Cursor cursor(bytes);
  if (cursor.u32() != kDatasetMagic) {
    throw FormatError("bad dataset magic: " + path.string());
  }
  if (cursor.u32() != kDatasetVersion) {
    throw FormatError("unsupported dataset version");
  }
  const uint64_t count = cursor.u64();
  if (cursor.remaining() % 16 != 0 || cursor.remaining() / 16 != count) {
    throw FormatError("dataset size mismatch");
  }
  std::vector<StreamRecord> records;
  records.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    StreamRecord rec;
    rec.item = cursor.u64();
    rec.timestamp = cursor.f64();
    if (rec.item == kEmptySlot || !std::isfinite(rec.timestamp)) {
      throw FormatError("invalid record in dataset");
    }
    records.push_back(rec);
  }
  return records;
}

inline void write_dataset_csv(const std::filesystem::path& path,
                              std::span<const StreamRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot open dataset for writing: " + path.string());
  }
  out << "item,timestamp\n";
  char line[64];
  for (const StreamRecord& rec : records) {
    std::snprintf(line, sizeof(line), "%llu,%.17g\n",
                  static_cast<unsigned long long>(rec.item), rec.timestamp);
    out << line;
  }
}

inline std::vector<StreamRecord> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open dataset: " + path.string());
  }
  std::vector<StreamRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    if (line_no == 1 && !std::isdigit(static_cast<unsigned char>(line[0]))) {
      continue;  // header row
    }
    const size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError("malformed CSV record at line " + std::to_string(line_no));
    }
    try {
      StreamRecord rec;
      rec.item = std::stoull(line.substr(0, comma));
      rec.timestamp = std::stod(line.substr(comma + 1));
      if (rec.item == kEmptySlot || !std::isfinite(rec.timestamp)) {
        throw FormatError("invalid record at line " + std::to_string(line_no));
      }
      records.push_back(rec);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("malformed CSV record at line " + std::to_string(line_no));
    }
  }
  return records;
}

inline std::vector<StreamRecord> read_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    return read_dataset_csv(path);
  }
  return read_dataset_binary(path);
}

}  // namespace faded
