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

#include "faded/decay.hpp"
#include "faded/errors.hpp"
#include "faded/experiment.hpp"
#include "faded/harness.hpp"
#include "faded/hash.hpp"
#include "faded/merge.hpp"
#include "faded/metrics.hpp"
#include "faded/oracle.hpp"
#include "faded/sketch.hpp"
#include "faded/stream.hpp"
#include "faded/summary.hpp"
#include "faded/transport.hpp"
#include "faded/wire.hpp"
