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

#include <cmath>
#include <cstdint>
#include <string>

#include "faded/errors.hpp"

namespace faded {

// Forward-decay weighting. The weight of an occurrence at time t_i is
// g(t_i - L) for a positive, monotone non-decreasing g and a landmark L
// earlier than every timestamp. Normalizing by g(t - L) at query time t
// yields a value in (0, 1], so all stored state can stay non-normalized
// until a query arrives.

enum class DecayKind : uint8_t {
  none = 0,         // g(a) = 1
  exponential = 1,  // g(a) = exp(rate * a)
  polynomial = 2,   // g(a) = (1 + a)^exponent
};

// Non-normalized weights and counters are kept strictly below this bound.
// Exponential streams rescale to a later landmark when a value would cross
// it; the other kinds cannot be rescaled and must fail instead.
inline constexpr double kOverflowGuard = 1e250;

struct DecaySpec {
  DecayKind kind = DecayKind::none;
  double param = 0.0;  // rate for exponential, exponent for polynomial
  double landmark = 0.0;

  static DecaySpec none(double landmark = 0.0) {
    check_landmark(landmark);
    return {DecayKind::none, 0.0, landmark};
  }

  static DecaySpec exponential(double rate, double landmark = 0.0) {
    check_landmark(landmark);
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
      throw ConfigError("exponential decay rate must be finite and >= 0");
    }
    return {DecayKind::exponential, rate, landmark};
  }

  static DecaySpec polynomial(double exponent, double landmark = 0.0) {
    check_landmark(landmark);
    if (!(exponent >= 0.0) || !std::isfinite(exponent)) {
      throw ConfigError("polynomial decay exponent must be finite and >= 0");
    }
    return {DecayKind::polynomial, exponent, landmark};
  }

  friend bool operator==(const DecaySpec&, const DecaySpec&) = default;

 private:
  static void check_landmark(double landmark) {
    if (!std::isfinite(landmark)) {
      throw ConfigError("landmark must be finite");
    }
  }
};

// g evaluated at an elapsed time from the landmark. Exponential decay is
// defined for negative elapsed times as well (needed after a landmark
// rebase); the other kinds require elapsed >= 0.
inline double growth(const DecaySpec& spec, double elapsed) {
  switch (spec.kind) {
    case DecayKind::none:
      return 1.0;
    case DecayKind::exponential:
      return std::exp(spec.param * elapsed);
    case DecayKind::polynomial:
      return std::pow(1.0 + elapsed, spec.param);
  }
  throw ConfigError("unknown decay kind");
}

// Non-normalized weight g(t_i - L) of an occurrence at time t_i.
// Throws RebaseNeeded when the weight would cross the overflow guard.
inline double raw_weight(const DecaySpec& spec, double t_i) {
  if (!(t_i >= spec.landmark)) {
    throw std::domain_error("timestamp " + std::to_string(t_i) +
                            " precedes landmark " + std::to_string(spec.landmark));
  }
  const double w = growth(spec, t_i - spec.landmark);
  if (!(w < kOverflowGuard)) {
    throw RebaseNeeded();
  }
  return w;
}

// raw / g(t - L): converts a non-normalized quantity into its value at
// query time t. For raw = raw_weight(spec, t_i) with t_i <= t the result
// lies in (0, 1].
inline double normalize(const DecaySpec& spec, double raw, double t) {
  if (!(t >= spec.landmark)) {
    throw std::domain_error("query time precedes landmark");
  }
  if (raw == 0.0) {
    return 0.0;
  }
  return raw / growth(spec, t - spec.landmark);
}

// Scale multiplier m = g(L - L') = exp(rate * (L - L')) < 1 for moving the
// landmark forward to new_landmark. The caller multiplies every stored
// counter and its running count by m and bumps its scale epoch; normalized
// results are unchanged. Only exponential decay admits a t-independent
// multiplier, so the other kinds are rejected.
inline double rebase_multiplier(const DecaySpec& spec, double new_landmark) {
  if (spec.kind != DecayKind::exponential) {
    throw ConfigError("only exponential decay supports landmark rebasing");
  }
  if (!(new_landmark > spec.landmark)) {
    throw ConfigError("rebase landmark must move forward");
  }
  return std::exp(spec.param * (spec.landmark - new_landmark));
}

// A non-normalized quantity tagged with the landmark revision it was
// computed under. Quantities from different revisions live at different
// scales and must never be added.
struct ScaledWeight {
  double value = 0.0;
  uint32_t scale_epoch = 0;

  friend bool operator==(const ScaledWeight&, const ScaledWeight&) = default;
};

inline ScaledWeight checked_add(ScaledWeight a, ScaledWeight b) {
  if (a.scale_epoch != b.scale_epoch) {
    throw std::invalid_argument("cannot add weights from different scale epochs");
  }
  return {a.value + b.value, a.scale_epoch};
}

}  // namespace faded
