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

#include "faded/harness.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>
#include <thread>
#include <vector>

#include "faded/oracle.hpp"
#include "faded/stream.hpp"
#include "reference_sketch.hpp"

using namespace faded;
using Catch::Matchers::WithinRel;

namespace {

SketchConfig harness_config(uint64_t seed = 40, DecaySpec decay = DecaySpec::none(),
                            double phi = 0.01) {
  SketchConfig config;
  config.phi = phi;
  config.seed = seed;
  config.decay = decay;
  return config;
}

Sketch sequential_run(std::span<const StreamRecord> records, const SketchConfig& config,
                      SketchDims dims) {
  Sketch sketch(config, dims);
  for (const auto& rec : records) {
    sketch.process(rec);
  }
  return sketch;
}

}  // namespace

TEST_CASE("block partitioning") {
  CHECK(partition(10, 2) == std::vector<Partition>{{0, 0, 5}, {1, 5, 10}});
  CHECK(partition(10, 3) == std::vector<Partition>{{0, 0, 4}, {1, 4, 7}, {2, 7, 10}});
  const auto sparse = partition(5, 8);
  CHECK(sparse.size() == 8);
  size_t total = 0;
  for (const auto& p : sparse) {
    CHECK(p.size() <= 1);
    total += p.size();
  }
  CHECK(total == 5);
  CHECK(sparse[4].size() == 1);
  CHECK(sparse[5].size() == 0);
  CHECK_THROWS_AS(partition(10, 0), ConfigError);
}

TEST_CASE("reduction plan shape") {
  CHECK(ReductionPlan{1}.rounds() == 0);
  CHECK(ReductionPlan{2}.rounds() == 1);
  CHECK(ReductionPlan{5}.rounds() == 3);
  CHECK(ReductionPlan{8}.rounds() == 3);
  const auto edges = ReductionPlan{8}.edges();
  CHECK(edges.size() == 7);
  std::set<int> senders;
  for (const auto& [receiver, sender] : edges) {
    CHECK(receiver < sender);
    CHECK(senders.insert(sender).second);  // every worker ships exactly once
  }
  CHECK(!senders.contains(0));
}

TEST_CASE("count reduction") {
  CHECK(reduce_counts({{5.0, 0}}).value == 5.0);
  const ScaledWeight four = reduce_counts({{1.0, 0}, {2.0, 0}, {3.0, 0}, {4.0, 0}});
  CHECK(four.value == 10.0);
  CHECK(four.scale_epoch == 0);
  CHECK_THROWS_AS(reduce_counts({{1.0, 0}, {2.0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_counts({}), ConfigError);
}

TEST_CASE("count reduction is stable across worker counts") {
  const auto records = generate({20'000, 500, 1.1, 11});
  const DecaySpec decay = DecaySpec::exponential(1e-4);
  const SketchDims dims{3, 32};
  std::vector<double> totals;
  for (int p : {1, 2, 4, 8}) {
    const auto sketches = run_workers(records, partition(records.size(), p),
                                      harness_config(40, decay), dims);
    std::vector<ScaledWeight> counts;
    for (const auto& s : sketches) {
      counts.push_back(s.local_count_scaled());
    }
    totals.push_back(reduce_counts(counts).value);
  }
  for (size_t i = 1; i < totals.size(); ++i) {
    CHECK_THAT(totals[i], WithinRel(totals[0], 1e-9));
  }
}

TEST_CASE("one worker reproduces the sequential run") {
  const auto records = generate({5'000, 300, 1.2, 21});
  const SketchDims dims{3, 32};
  const auto sketches = run_workers(records, partition(records.size(), 1),
                                    harness_config(), dims);
  REQUIRE(sketches.size() == 1);
  CHECK(sketches[0] == sequential_run(records, harness_config(), dims));

  const ReductionPlan plan{1};
  const Sketch reduced = reduce_sketches(sketches, plan);
  CHECK(reduced == sketches[0]);
}

TEST_CASE("two workers split a two-record stream") {
  const std::vector<StreamRecord> records = {{1, 0.0}, {2, 1.0}};
  const auto sketches = run_workers(records, partition(2, 2), harness_config(), {2, 8});
  REQUIRE(sketches.size() == 2);
  CHECK(sketches[0].local_count() == 1.0);
  CHECK(sketches[1].local_count() == 1.0);
}

TEST_CASE("worker failures abort the run") {
  // a record preceding the landmark poisons the third block
  std::vector<StreamRecord> records;
  for (int i = 0; i < 40; ++i) {
    records.push_back({1, 10.0 + i});
  }
  records[25].timestamp = 3.0;
  CHECK_THROWS_AS(run_workers(records, partition(records.size(), 4),
                              harness_config(1, DecaySpec::none(10.0)), {2, 8}),
                  std::domain_error);
}

TEST_CASE("split halves merge to the sequential totals") {
  const auto records = generate({10'000, 600, 1.1, 31});
  const DecaySpec decay = DecaySpec::exponential(1e-4);
  const SketchDims dims{4, 64};
  const SketchConfig config = harness_config(77, decay);
  const Sketch sequential = sequential_run(records, config, dims);
  const auto sketches = run_workers(records, partition(records.size(), 2), config, dims);
  const Sketch merged = reduce_sketches(sketches, ReductionPlan{2});
  CHECK_THAT(merged.local_count(), WithinRel(sequential.local_count(), 1e-9));
  for (uint32_t row = 0; row < dims.depth; ++row) {
    CHECK_THAT(merged.row_sum(row), WithinRel(sequential.row_sum(row), 1e-9));
  }
}

TEST_CASE("parallel and sequential runs expose the same row totals") {
  const auto records = generate({100'000, 5'000, 1.1, 51});
  const DecaySpec decay = DecaySpec::exponential(1.0 / 100'000.0);
  const SketchDims dims{4, 128};
  const SketchConfig config = harness_config(3, decay);
  const double t = 99'999.0;

  const ParallelRun baseline =
      run_parallel(records, 1, config, dims, TransportKind::inproc, t);
  std::vector<double> baseline_rows;
  for (uint32_t row = 0; row < dims.depth; ++row) {
    baseline_rows.push_back(baseline.global.row_sum(row));
  }
  for (int p : {2, 4, 8}) {
    const ParallelRun run = run_parallel(records, p, config, dims, TransportKind::inproc, t);
    CHECK(run.global_count_raw.scale_epoch == 0);
    CHECK_THAT(run.global_count_raw.value, WithinRel(baseline.global_count_raw.value, 1e-9));
    for (uint32_t row = 0; row < dims.depth; ++row) {
      CHECK_THAT(run.global.row_sum(row), WithinRel(run.global_count_raw.value, 1e-9));
      CHECK_THAT(run.global.row_sum(row), WithinRel(baseline_rows[row], 1e-9));
    }
  }
}

TEST_CASE("parallel query matches the oracle like the sequential one") {
  const auto records = generate({50'000, 5'000, 1.2, 61});
  const DecaySpec decay = DecaySpec::exponential(1.0 / 50'000.0);
  const double phi = 0.01;
  const SketchDims dims{4, 512};
  const SketchConfig config = harness_config(5, decay, phi);
  const ExactOracle oracle(records, decay);
  const double t = 49'999.0;

  const auto exact = oracle.heavy_hitters(phi, t);
  REQUIRE(!exact.empty());
  const ParallelRun sequential =
      run_parallel(records, 1, config, dims, TransportKind::inproc, t);
  const ParallelRun wide = run_parallel(records, 8, config, dims, TransportKind::inproc, t);
  for (const ParallelRun* run : {&sequential, &wide}) {
    std::set<uint64_t> reported;
    for (const auto& e : run->report.entries) {
      reported.insert(e.item);
    }
    for (const auto& e : exact) {
      CHECK(reported.contains(e.item));
    }
    for (const auto& e : run->report.entries) {
      CHECK(oracle.raw(e.item) > (phi - sequential.global.epsilon()) * oracle.total_raw());
    }
  }
}

TEST_CASE("transported reduction equals the serial fold bitwise") {
  const auto records = generate({20'000, 1'000, 1.1, 71});
  const SketchDims dims{3, 64};
  const SketchConfig config = harness_config(9, DecaySpec::exponential(1e-4));
  const int p = 5;  // odd count exercises the idle branches
  const auto sketches = run_workers(records, partition(records.size(), p), config, dims);
  const Sketch folded = reduce_sketches(sketches, ReductionPlan{p});

  const ParallelRun run = run_parallel(records, p, config, dims, TransportKind::inproc,
                                       19'999.0);
  CHECK(serialize(run.global) == serialize(folded));
}

TEST_CASE("in-process and tcp transports produce identical global sketches") {
  const auto records = generate({10'000, 800, 1.3, 81});
  const SketchDims dims{3, 64};
  const SketchConfig config = harness_config(17, DecaySpec::exponential(1e-4));
  const double t = 9'999.0;
  const ParallelRun a = run_parallel(records, 4, config, dims, TransportKind::inproc, t);
  const ParallelRun b = run_parallel(records, 4, config, dims, TransportKind::tcp, t);
  CHECK(serialize(a.global) == serialize(b.global));
  CHECK(a.global_count_raw == b.global_count_raw);
  CHECK(a.report.entries == b.report.entries);
}

TEST_CASE("coordinated rebases keep parallel runs mergeable and accurate") {
  // weights grow through the guard twice; all four workers must agree on
  // the final scale epoch
  const DecaySpec decay = DecaySpec::exponential(1.0);
  const SketchDims dims{2, 8};
  const SketchConfig config = harness_config(23, decay, 0.2);
  const size_t n = 20'000;
  std::vector<StreamRecord> records;
  records.reserve(n);
  uint64_t rng = 5150;
  for (size_t i = 0; i < n; ++i) {
    records.push_back({1 + splitmix64(rng) % 64,
                       1200.0 * static_cast<double>(i) / static_cast<double>(n)});
  }
  testing::ReferenceSketch reference{Sketch(config, dims)};
  for (const auto& rec : records) {
    reference.process(rec.item, rec.timestamp);
  }
  const ParallelRun run =
      run_parallel(records, 4, config, dims, TransportKind::inproc, 1200.0);
  CHECK(run.global.scale_epoch() >= 2);
  CHECK(run.global_count_raw.scale_epoch == run.global.scale_epoch());
  for (uint64_t item = 1; item <= 64; ++item) {
    const double expected = reference.normalized_estimate(item, 1200.0);
    REQUIRE(expected > 0.0);
    CHECK_THAT(run.global.point_estimate(item, 1200.0), WithinRel(expected, 1e-9));
  }
}

TEST_CASE("multi-process tcp endpoints reduce across real sockets") {
  const auto records = generate({5'000, 400, 1.2, 91});
  const SketchDims dims{3, 32};
  const SketchConfig config = harness_config(29, DecaySpec::none(), 0.02);
  const double t = 4'999.0;
  const int workers = 3;
  const std::string endpoint = "127.0.0.1:39141";

  std::optional<ParallelRun> root_result;
  std::exception_ptr failure;
  std::jthread coordinator([&] {
    try {
      TcpProcessEndpoint ep(workers, endpoint);
      root_result = run_process_worker(records, 0, workers, config, dims, ep, t);
    } catch (...) {
      failure = std::current_exception();
    }
  });
  std::vector<std::jthread> others;
  for (int i = 1; i < workers; ++i) {
    others.emplace_back([&, i] {
      TcpProcessEndpoint ep(i, workers, endpoint);
      run_process_worker(records, i, workers, config, dims, ep, t);
    });
  }
  others.clear();
  coordinator.join();
  if (failure) {
    std::rethrow_exception(failure);
  }
  REQUIRE(root_result.has_value());

  const ParallelRun reference =
      run_parallel(records, workers, config, dims, TransportKind::inproc, t);
  CHECK(serialize(root_result->global) == serialize(reference.global));
  CHECK(root_result->global_count_raw == reference.global_count_raw);
}

TEST_CASE("online snapshots reflect exactly the processed prefix") {
  const auto records = generate({200'000, 2'000, 1.1, 101});
  const SketchDims dims{3, 64};
  const SketchConfig config = harness_config(31, DecaySpec::none(), 0.01);
  OnlineHarness harness(records, 3, config, dims);

  // a few mid-stream queries while workers are busy
  for (int round = 0; round < 3; ++round) {
    const auto result = harness.query(static_cast<double>(records.size()), 0.05);
    size_t processed = 0;
    for (const size_t c : result.records_processed) {
      processed += c;
    }
    // unit weights: the merged count is exactly the number of records seen
    CHECK(result.global.local_count() == static_cast<double>(processed));
    CHECK(result.global_count_raw.value == static_cast<double>(processed));
    for (uint32_t row = 0; row < dims.depth; ++row) {
      if (processed == 0) {
        CHECK(result.global.row_sum(row) == 0.0);
      } else {
        CHECK_THAT(result.global.row_sum(row),
                   WithinRel(static_cast<double>(processed), 1e-9));
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  // after draining, a snapshot covers the whole stream
  harness.drain();
  const auto final_result = harness.query(static_cast<double>(records.size()), 0.05);
  CHECK(final_result.global.local_count() == static_cast<double>(records.size()));
  harness.stop();
}
