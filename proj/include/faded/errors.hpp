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

#include <stdexcept>

namespace faded {

// Invalid parameter combinations (ranges, dimensions, flag conflicts).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent serialized images.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Socket or channel failures in the message-passing layer.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A decayed weight or running count would cross the overflow guard; the
// owning structure has to rescale to a later landmark before retrying.
class RebaseNeeded : public std::overflow_error {
 public:
  RebaseNeeded() : std::overflow_error("value exceeds overflow guard, rebase required") {}
};

}  // namespace faded
