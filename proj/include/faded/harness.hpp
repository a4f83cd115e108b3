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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <latch>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "faded/errors.hpp"
#include "faded/merge.hpp"
#include "faded/sketch.hpp"
#include "faded/transport.hpp"
#include "faded/wire.hpp"

namespace faded {

// Parallel execution: the dataset is split into contiguous blocks, each
// worker folds its block into a private sketch, and a binomial-tree
// reduction merges local counts and sketches into worker 0, which answers
// the query.

struct Partition {
  int worker = 0;
  size_t begin = 0;
  size_t end = 0;  // half-open

  size_t size() const { return end - begin; }

  friend bool operator==(const Partition&, const Partition&) = default;
};

// Contiguous blocks in order, sizes differing by at most one; the remainder
// goes to the leading blocks.
inline std::vector<Partition> partition(size_t n, int workers) {
  if (workers < 1) {
    throw ConfigError("worker count must be positive");
  }
  std::vector<Partition> parts(workers);
  const size_t base = n / static_cast<size_t>(workers);
  const size_t extra = n % static_cast<size_t>(workers);
  size_t at = 0;
  for (int i = 0; i < workers; ++i) {
    const size_t len = base + (static_cast<size_t>(i) < extra ? 1 : 0);
    parts[i] = {i, at, at + len};
    at += len;
  }
  return parts;
}

// Binomial reduction tree over the workers, rooted at worker 0. In round r
// (step 2^r) every worker whose index is an odd multiple of the step sends
// to the partner one step below; the merge order is therefore fixed for a
// given worker count, which keeps floating-point results reproducible.
struct ReductionPlan {
  int workers = 1;

  int root() const { return 0; }

  int rounds() const {
    int r = 0;
    for (int step = 1; step < workers; step <<= 1) {
      ++r;
    }
    return r;
  }

  // (receiver, sender) pairs across all rounds.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int step = 1; step < workers; step <<= 1) {
      for (int receiver = 0; receiver + step < workers; receiver += 2 * step) {
        out.emplace_back(receiver, receiver + step);
      }
    }
    return out;
  }
};

// Tree fold through a transport. Non-root workers return nothing once their
// accumulated value has been shipped; the root ends up holding the fold of
// all values with receivers always on the left.
template <typename T, typename Encode, typename Decode, typename Combine>
std::optional<T> tree_reduce(Transport& endpoint, int self, const ReductionPlan& plan,
                             T value, Encode encode, Decode decode, Combine combine) {
  for (int step = 1; step < plan.workers; step <<= 1) {
    const int span = 2 * step;
    if (self % span == step) {
      endpoint.send(self - step, encode(value));
      return std::nullopt;
    }
    if (self % span == 0 && self + step < plan.workers) {
      T other = decode(endpoint.receive(self + step));
      value = combine(std::move(value), std::move(other));
    }
  }
  return value;
}

// Broadcast from the root down the same tree.
template <typename T, typename Encode, typename Decode>
T tree_broadcast(Transport& endpoint, int self, const ReductionPlan& plan, T value,
                 Encode encode, Decode decode) {
  int top = 1;
  while (top < plan.workers) {
    top <<= 1;
  }
  for (int step = top >> 1; step >= 1; step >>= 1) {
    const int span = 2 * step;
    if (self % span == 0 && self + step < plan.workers) {
      endpoint.send(self + step, encode(value));
    } else if (self % span == step) {
      value = decode(endpoint.receive(self - step));
    }
  }
  return value;
}

namespace detail {

inline std::vector<uint8_t> encode_count(const ScaledWeight& w) {
  std::vector<uint8_t> frame;
  frame.reserve(12);
  put_f64(frame, w.value);
  put_u32(frame, w.scale_epoch);
  return frame;
}

inline ScaledWeight decode_count(std::span<const uint8_t> frame) {
  Cursor cursor(frame);
  ScaledWeight w;
  w.value = cursor.f64();
  w.scale_epoch = cursor.u32();
  if (cursor.remaining() != 0) {
    throw FormatError("count frame size mismatch");
  }
  return w;
}

inline std::vector<uint8_t> encode_epoch(uint32_t epoch) {
  std::vector<uint8_t> frame;
  put_u32(frame, epoch);
  return frame;
}

inline uint32_t decode_epoch(std::span<const uint8_t> frame) {
  Cursor cursor(frame);
  const uint32_t epoch = cursor.u32();
  if (cursor.remaining() != 0) {
    throw FormatError("epoch frame size mismatch");
  }
  return epoch;
}

}  // namespace detail

// Deterministic serial folds, used directly and as the reference the
// transported reductions must reproduce bit for bit.

inline ScaledWeight reduce_counts(std::vector<ScaledWeight> counts) {
  if (counts.empty()) {
    throw ConfigError("nothing to reduce");
  }
  const ReductionPlan plan{static_cast<int>(counts.size())};
  for (int step = 1; step < plan.workers; step <<= 1) {
    for (int receiver = 0; receiver + step < plan.workers; receiver += 2 * step) {
      counts[receiver] = checked_add(counts[receiver], counts[receiver + step]);
    }
  }
  return counts[0];
}

inline Sketch reduce_sketches(std::vector<Sketch> sketches, const ReductionPlan& plan) {
  if (sketches.empty() || static_cast<int>(sketches.size()) != plan.workers) {
    throw ConfigError("sketch count does not match plan");
  }
  std::vector<std::optional<Sketch>> slots;
  slots.reserve(sketches.size());
  for (Sketch& s : sketches) {
    slots.emplace_back(std::move(s));
  }
  for (int step = 1; step < plan.workers; step <<= 1) {
    for (int receiver = 0; receiver + step < plan.workers; receiver += 2 * step) {
      slots[receiver] = merge_sketch(*slots[receiver], *slots[receiver + step]);
      slots[receiver + step].reset();
    }
  }
  return std::move(*slots[0]);
}

// Shared rebase schedule. Whoever hits the overflow guard first raises the
// target epoch; everyone else catches up at its next record boundary, so no
// two sketches ever merge at different scales.
class RebaseCoordinator {
 public:
  uint32_t target() const { return target_.load(std::memory_order_acquire); }

  void raise_to(uint32_t desired) {
    uint32_t current = target_.load(std::memory_order_relaxed);
    while (current < desired &&
           !target_.compare_exchange_weak(current, desired, std::memory_order_acq_rel)) {
    }
  }

 private:
  std::atomic<uint32_t> target_{0};
};

inline void catch_up_epoch(Sketch& sketch, uint32_t target) {
  while (sketch.scale_epoch() < target) {
    sketch.apply_rebase();
  }
}

inline void ingest_coordinated(Sketch& sketch, const StreamRecord& record,
                               RebaseCoordinator& coordinator) {
  catch_up_epoch(sketch, coordinator.target());
  while (!sketch.process_or_signal(record)) {
    if (!sketch.can_rebase()) {
      throw std::overflow_error("decayed count exceeds overflow guard and cannot be rebased");
    }
    coordinator.raise_to(sketch.scale_epoch() + 1);
    catch_up_epoch(sketch, coordinator.target());
  }
}

// Ingest all partitions concurrently, one private sketch per worker. A
// failing worker aborts the run with its own error.
inline std::vector<Sketch> run_workers(std::span<const StreamRecord> records,
                                       const std::vector<Partition>& partitions,
                                       const SketchConfig& config, SketchDims dims) {
  const int workers = static_cast<int>(partitions.size());
  if (workers < 1) {
    throw ConfigError("worker count must be positive");
  }
  std::vector<std::optional<Sketch>> out(workers);
  std::vector<std::exception_ptr> failures(workers);
  RebaseCoordinator coordinator;
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (int i = 0; i < workers; ++i) {
      threads.emplace_back([&, i] {
        try {
          Sketch sketch(config, dims);
          const Partition& part = partitions[i];
          for (size_t at = part.begin; at < part.end; ++at) {
            ingest_coordinated(sketch, records[at], coordinator);
          }
          out[i] = std::move(sketch);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      });
    }
  }
  for (int i = 0; i < workers; ++i) {
    if (failures[i]) {
      std::rethrow_exception(failures[i]);
    }
  }
  std::vector<Sketch> sketches;
  sketches.reserve(workers);
  for (auto& slot : out) {
    catch_up_epoch(*slot, coordinator.target());
    sketches.push_back(std::move(*slot));
  }
  return sketches;
}

inline HeavyHitterReport coordinator_query(const Sketch& global, ScaledWeight global_count_raw,
                                           double t, double phi) {
  if (global.scale_epoch() != global_count_raw.scale_epoch) {
    throw std::invalid_argument("global count and sketch are at different scale epochs");
  }
  return global.query(t, global_count_raw.value, phi);
}

enum class TransportKind { inproc, tcp };

struct ParallelRun {
  HeavyHitterReport report;
  Sketch global;
  ScaledWeight global_count_raw;
  size_t records = 0;
  int workers = 1;
  double ingest_ms = 0.0;
  double total_ms = 0.0;
};

// Full offline pipeline: partition, parallel ingest, epoch sync, count and
// sketch reductions over the chosen transport, coordinator query.
inline ParallelRun run_parallel(std::span<const StreamRecord> records, int workers,
                                const SketchConfig& config, SketchDims dims,
                                TransportKind transport, double query_time,
                                std::optional<double> phi_override = {}) {
  const auto partitions = partition(records.size(), workers);
  const ReductionPlan plan{workers};

  std::unique_ptr<InprocFabric> inproc;
  std::unique_ptr<TcpFabric> tcp_fabric;
  if (transport == TransportKind::inproc) {
    inproc = std::make_unique<InprocFabric>(workers);
  } else {
    tcp_fabric = std::make_unique<TcpFabric>(workers, plan.edges());
  }
  auto endpoint = [&](int i) -> Transport& {
    return inproc ? inproc->endpoint(i) : tcp_fabric->endpoint(i);
  };

  RebaseCoordinator coordinator;
  std::latch ingest_done(workers);
  std::vector<std::exception_ptr> failures(workers);
  std::atomic<bool> aborted{false};
  std::optional<Sketch> global;
  std::optional<ScaledWeight> global_count;

  const auto started = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point ingested;
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (int i = 0; i < workers; ++i) {
      threads.emplace_back([&, i] {
        bool counted_down = false;
        try {
          Sketch sketch(config, dims);
          const Partition& part = partitions[i];
          for (size_t at = part.begin; at < part.end; ++at) {
            ingest_coordinated(sketch, records[at], coordinator);
          }
          ingest_done.count_down();
          counted_down = true;
          ingest_done.wait();
          if (aborted.load(std::memory_order_acquire)) {
            return;
          }
          catch_up_epoch(sketch, coordinator.target());

          auto count = tree_reduce(endpoint(i), i, plan, sketch.local_count_scaled(),
                                   detail::encode_count, detail::decode_count,
                                   [](ScaledWeight a, ScaledWeight b) { return checked_add(a, b); });
          auto merged = tree_reduce(
              endpoint(i), i, plan, std::move(sketch),
              [](const Sketch& s) { return serialize(s); },
              [](std::span<const uint8_t> bytes) { return deserialize(bytes); },
              [](Sketch a, Sketch b) { return merge_sketch(a, b); });
          if (i == plan.root()) {
            global_count = *count;
            global = std::move(*merged);
          }
        } catch (...) {
          failures[i] = std::current_exception();
          aborted.store(true, std::memory_order_release);
          if (!counted_down) {
            ingest_done.count_down();
          }
        }
      });
    }
    ingest_done.wait();
    ingested = std::chrono::steady_clock::now();
  }
  for (int i = 0; i < workers; ++i) {
    if (failures[i]) {
      std::rethrow_exception(failures[i]);
    }
  }
  const auto finished = std::chrono::steady_clock::now();

  ParallelRun run{
      .report = {},
      .global = std::move(*global),
      .global_count_raw = *global_count,
      .records = records.size(),
      .workers = workers,
      .ingest_ms = std::chrono::duration<double, std::milli>(ingested - started).count(),
      .total_ms = std::chrono::duration<double, std::milli>(finished - started).count(),
  };
  const double phi = phi_override.value_or(config.phi);
  run.report = coordinator_query(run.global, run.global_count_raw, query_time, phi);
  return run;
}

// One worker process of a multi-host run. Rebases happen locally during
// ingest; an epoch max-reduce plus broadcast equalizes scales before any
// state is merged. Only the coordinator gets a populated result.
inline std::optional<ParallelRun> run_process_worker(std::span<const StreamRecord> records,
                                                     int self, int workers,
                                                     const SketchConfig& config, SketchDims dims,
                                                     Transport& endpoint, double query_time,
                                                     std::optional<double> phi_override = {}) {
  const auto partitions = partition(records.size(), workers);
  const ReductionPlan plan{workers};
  const auto started = std::chrono::steady_clock::now();

  Sketch sketch(config, dims);
  const Partition& part = partitions[self];
  for (size_t at = part.begin; at < part.end; ++at) {
    sketch.process(records[at]);
  }
  const auto ingested = std::chrono::steady_clock::now();

  auto max_epoch = tree_reduce(endpoint, self, plan, sketch.scale_epoch(),
                               detail::encode_epoch, detail::decode_epoch,
                               [](uint32_t a, uint32_t b) { return std::max(a, b); });
  const uint32_t agreed = tree_broadcast(endpoint, self, plan,
                                         max_epoch.value_or(0), detail::encode_epoch,
                                         detail::decode_epoch);
  catch_up_epoch(sketch, agreed);

  auto count = tree_reduce(endpoint, self, plan, sketch.local_count_scaled(),
                           detail::encode_count, detail::decode_count,
                           [](ScaledWeight a, ScaledWeight b) { return checked_add(a, b); });
  auto merged = tree_reduce(
      endpoint, self, plan, std::move(sketch),
      [](const Sketch& s) { return serialize(s); },
      [](std::span<const uint8_t> bytes) { return deserialize(bytes); },
      [](Sketch a, Sketch b) { return merge_sketch(a, b); });
  if (self != plan.root()) {
    return std::nullopt;
  }

  const auto finished = std::chrono::steady_clock::now();
  ParallelRun run{
      .report = {},
      .global = std::move(*merged),
      .global_count_raw = *count,
      .records = part.size(),
      .workers = workers,
      .ingest_ms = std::chrono::duration<double, std::milli>(ingested - started).count(),
      .total_ms = std::chrono::duration<double, std::milli>(finished - started).count(),
  };
  run.report = coordinator_query(run.global, run.global_count_raw, query_time,
                                 phi_override.value_or(config.phi));
  return run;
}

// Streaming ingestion with snapshot-on-query. Each worker thread keeps
// processing its block; a query copies every worker's sketch at a record
// boundary, equalizes scale epochs on the copies, and reduces those while
// ingestion continues.
class OnlineHarness {
 public:
  OnlineHarness(std::span<const StreamRecord> records, int workers,
                const SketchConfig& config, SketchDims dims)
      : records_(records),
        config_(config),
        dims_(dims),
        partitions_(partition(records.size(), workers)) {
    states_ = std::vector<WorkerState>(workers);
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~OnlineHarness() { stop(); }

  struct Snapshot {
    std::vector<Sketch> sketches;
    std::vector<size_t> records_processed;
  };

  Snapshot snapshot() {
    const uint64_t generation = ++snapshot_generation_;
    Snapshot snap;
    const int workers = static_cast<int>(partitions_.size());
    snap.records_processed.resize(workers);
    for (int i = 0; i < workers; ++i) {
      WorkerState& state = states_[i];
      std::unique_lock lock(state.mu);
      state.cv.wait(lock, [&] { return state.generation >= generation || state.failure; });
      if (state.failure) {
        std::rethrow_exception(state.failure);
      }
      snap.sketches.push_back(*state.copy);
      snap.records_processed[i] = state.position;
    }
    uint32_t top_epoch = 0;
    for (const Sketch& s : snap.sketches) {
      top_epoch = std::max(top_epoch, s.scale_epoch());
    }
    for (Sketch& s : snap.sketches) {
      catch_up_epoch(s, top_epoch);
    }
    return snap;
  }

  struct QueryResult {
    HeavyHitterReport report;
    ScaledWeight global_count_raw;
    Sketch global;
    std::vector<size_t> records_processed;
  };

  QueryResult query(double t, double phi) {
    Snapshot snap = snapshot();
    std::vector<ScaledWeight> counts;
    counts.reserve(snap.sketches.size());
    for (const Sketch& s : snap.sketches) {
      counts.push_back(s.local_count_scaled());
    }
    const ReductionPlan plan{static_cast<int>(snap.sketches.size())};
    ScaledWeight total = reduce_counts(counts);
    Sketch global = reduce_sketches(std::move(snap.sketches), plan);
    HeavyHitterReport report = coordinator_query(global, total, t, phi);
    return {std::move(report), total, std::move(global), std::move(snap.records_processed)};
  }

  // Blocks until every worker consumed its whole block.
  void drain() {
    for (auto& state : states_) {
      std::unique_lock lock(state.mu);
      state.cv.wait(lock, [&] { return state.done || state.failure; });
      if (state.failure) {
        std::rethrow_exception(state.failure);
      }
    }
  }

  void stop() {
    stopping_.store(true, std::memory_order_release);
    for (auto& t : threads_) {
      if (t.joinable()) {
        t.join();
      }
    }
    threads_.clear();
  }

 private:
  struct WorkerState {
    std::mutex mu;
    std::condition_variable cv;
    std::optional<Sketch> copy;
    size_t position = 0;
    uint64_t generation = 0;
    bool done = false;
    std::exception_ptr failure;
  };

  void worker_loop(int index) {
    WorkerState& state = states_[index];
    try {
      Sketch sketch(config_, dims_);
      const Partition& part = partitions_[index];
      size_t processed = 0;
      uint64_t served = 0;
      auto serve = [&] {
        const uint64_t wanted = snapshot_generation_.load(std::memory_order_acquire);
        if (wanted == served) {
          return;
        }
        std::lock_guard lock(state.mu);
        state.copy = sketch;
        state.position = processed;
        state.generation = wanted;
        served = wanted;
        state.cv.notify_all();
      };
      for (size_t at = part.begin; at < part.end; ++at) {
        serve();
        ingest_coordinated(sketch, records_[at], coordinator_);
        ++processed;
      }
      {
        std::lock_guard lock(state.mu);
        state.done = true;
        state.cv.notify_all();
      }
      while (!stopping_.load(std::memory_order_acquire)) {
        serve();
        std::this_thread::sleep_for(std::chrono::microseconds(200));
      }
    } catch (...) {
      std::lock_guard lock(state.mu);
      state.failure = std::current_exception();
      state.cv.notify_all();
    }
  }

  std::span<const StreamRecord> records_;
  SketchConfig config_;
  SketchDims dims_;
  std::vector<Partition> partitions_;
  std::vector<WorkerState> states_;
  std::vector<std::jthread> threads_;
  std::atomic<uint64_t> snapshot_generation_{0};
  std::atomic<bool> stopping_{false};
  RebaseCoordinator coordinator_;
};

}  // namespace faded
