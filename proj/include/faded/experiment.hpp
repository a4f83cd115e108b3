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

#include <optional>
#include <string>
#include <vector>

#include "faded/harness.hpp"
#include "faded/metrics.hpp"
#include "faded/oracle.hpp"
#include "faded/stream.hpp"

namespace faded {

// One experiment cell: stream shape, sketch shape, worker count, seeds.
struct ExperimentParams {
  uint64_t n = 1'000'000;
  uint64_t m = 100'000;
  double rho = 1.1;
  double phi = 0.01;
  uint32_t width = 1340;
  uint32_t depth = 4;
  int workers = 1;
  DecayKind decay_kind = DecayKind::none;
  std::optional<double> lambda;  // exponential rate; defaults to 1/n
  double beta = 1.0;
  double landmark = 0.0;
  uint64_t stream_seed = 1;
  uint64_t hash_seed = 1;
  TimestampModel timestamps = TimestampModel::index;
  double arrival_rate = 1.0;
  TransportKind transport = TransportKind::inproc;
  std::optional<double> query_time;  // defaults to the newest timestamp
};

inline DecaySpec make_decay(const ExperimentParams& p) {
  switch (p.decay_kind) {
    case DecayKind::none:
      return DecaySpec::none(p.landmark);
    case DecayKind::exponential:
      return DecaySpec::exponential(p.lambda.value_or(1.0 / static_cast<double>(p.n)),
                                    p.landmark);
    case DecayKind::polynomial:
      return DecaySpec::polynomial(p.beta, p.landmark);
  }
  throw ConfigError("unknown decay kind");
}

inline SketchConfig make_config(const ExperimentParams& p) {
  SketchConfig config;
  config.phi = p.phi;
  config.seed = p.hash_seed;
  config.decay = make_decay(p);
  return config;
}

inline ZipfStreamSpec make_stream_spec(const ExperimentParams& p) {
  return {p.n, p.m, p.rho, p.stream_seed, p.timestamps, p.arrival_rate};
}

inline double default_query_time(const ExperimentParams& p,
                                 std::span<const StreamRecord> records) {
  if (p.query_time) {
    return *p.query_time;
  }
  double latest = p.landmark;
  for (const StreamRecord& rec : records) {
    latest = std::max(latest, rec.timestamp);
  }
  return latest;
}

struct RunOutcome {
  MetricsRow row;
  HeavyHitterReport report;
};

// Generates nothing: stream and oracle are supplied so callers can share
// them across worker counts.
inline RunOutcome run_once(const ExperimentParams& p, std::span<const StreamRecord> records,
                           const ExactOracle& oracle) {
  const double t = default_query_time(p, records);
  ParallelRun run = run_parallel(records, p.workers, make_config(p),
                                 SketchDims{p.depth, p.width}, p.transport, t);
  MetricsRow row = score(run.report, oracle, p.phi, t);
  row.n = p.n;
  row.m = p.m;
  row.rho = p.rho;
  row.width = p.width;
  row.depth = p.depth;
  row.workers = p.workers;
  row.seed = p.hash_seed;
  row.ingest_ms = run.ingest_ms;
  row.updates_per_ms = run.ingest_ms > 0.0
                           ? updates_per_ms(run.records, run.ingest_ms)
                           : 0.0;
  return {std::move(row), std::move(run.report)};
}

enum class GridAxis { n, rho, phi, width, workers };

inline const char* axis_name(GridAxis axis) {
  switch (axis) {
    case GridAxis::n: return "n";
    case GridAxis::rho: return "rho";
    case GridAxis::phi: return "phi";
    case GridAxis::width: return "width";
    case GridAxis::workers: return "workers";
  }
  return "?";
}

inline GridAxis axis_from_name(const std::string& name) {
  if (name == "n") return GridAxis::n;
  if (name == "rho") return GridAxis::rho;
  if (name == "phi") return GridAxis::phi;
  if (name == "width" || name == "w") return GridAxis::width;
  if (name == "workers" || name == "p") return GridAxis::workers;
  throw ConfigError("unknown grid axis: " + name);
}

inline ExperimentParams apply_axis(ExperimentParams p, GridAxis axis, double value) {
  switch (axis) {
    case GridAxis::n:
      p.n = static_cast<uint64_t>(value);
      break;
    case GridAxis::rho:
      p.rho = value;
      break;
    case GridAxis::phi:
      p.phi = value;
      break;
    case GridAxis::width:
      p.width = static_cast<uint32_t>(value);
      break;
    case GridAxis::workers:
      p.workers = static_cast<int>(value);
      break;
  }
  return p;
}

// One varying axis, everything else fixed, `repetitions` independent seeds
// per cell.
struct ExperimentGrid {
  GridAxis axis = GridAxis::workers;
  std::vector<double> values;
  int repetitions = 1;
  ExperimentParams base;
};

inline void append_aggregates(std::vector<MetricsRow>& cell_rows);

// Per-run rows followed by mean/min/max aggregate rows for every cell.
inline std::vector<MetricsRow> run_experiment(const ExperimentGrid& grid) {
  if (grid.repetitions < 1) {
    throw ConfigError("repetitions must be positive");
  }
  std::vector<MetricsRow> rows;
  std::optional<ZipfStreamSpec> cached_spec;
  std::vector<StreamRecord> cached_records;
  std::optional<ExactOracle> cached_oracle;
  for (const double value : grid.values) {
    std::vector<MetricsRow> cell_rows;
    for (int rep = 0; rep < grid.repetitions; ++rep) {
      ExperimentParams p = apply_axis(grid.base, grid.axis, value);
      p.stream_seed += static_cast<uint64_t>(rep);
      p.hash_seed += static_cast<uint64_t>(rep);
      const ZipfStreamSpec spec = make_stream_spec(p);
      const DecaySpec decay = make_decay(p);
      if (!cached_spec ||
          !(cached_spec->n == spec.n && cached_spec->m == spec.m &&
            cached_spec->rho == spec.rho && cached_spec->seed == spec.seed &&
            cached_spec->timestamps == spec.timestamps &&
            cached_spec->arrival_rate == spec.arrival_rate) ||
          !(cached_oracle && cached_oracle->decay() == decay)) {
        cached_records = generate(spec);
        cached_oracle.emplace(cached_records, decay);
        cached_spec = spec;
      }
      RunOutcome outcome = run_once(p, cached_records, *cached_oracle);
      outcome.row.repetition = rep;
      cell_rows.push_back(std::move(outcome.row));
    }
    append_aggregates(cell_rows);
    rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());
  }
  return rows;
}

inline void append_aggregates(std::vector<MetricsRow>& cell_rows) {
  if (cell_rows.empty()) {
    return;
  }
  const size_t runs = cell_rows.size();
  MetricsRow mean = cell_rows.front();
  MetricsRow lo = cell_rows.front();
  MetricsRow hi = cell_rows.front();
  auto fold = [&](auto member) {
    double sum = 0.0;
    double mn = cell_rows.front().*member;
    double mx = mn;
    for (const MetricsRow& r : cell_rows) {
      const double v = r.*member;
      sum += v;
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    mean.*member = sum / static_cast<double>(runs);
    lo.*member = mn;
    hi.*member = mx;
  };
  fold(&MetricsRow::precision);
  fold(&MetricsRow::recall);
  fold(&MetricsRow::abs_err_mean);
  fold(&MetricsRow::abs_err_max);
  fold(&MetricsRow::are_mean);
  fold(&MetricsRow::are_max);
  fold(&MetricsRow::updates_per_ms);
  fold(&MetricsRow::ingest_ms);
  for (MetricsRow* agg : {&mean, &lo, &hi}) {
    agg->seed = 0;
    agg->repetition = -1;
  }
  mean.stat = "mean";
  lo.stat = "min";
  hi.stat = "max";
  cell_rows.push_back(std::move(mean));
  cell_rows.push_back(std::move(lo));
  cell_rows.push_back(std::move(hi));
}

// ---------------------------------------------------------------------------
// Strong and weak scaling.

enum class ScaleMode { strong, weak };

struct ScaleSpec {
  ScaleMode mode = ScaleMode::strong;
  std::vector<int> worker_counts;
  uint64_t n = 1'000'000;  // total size (strong) or per-worker size (weak)
  int repetitions = 3;
  ExperimentParams base;
};

struct ScalePoint {
  std::string mode;
  int workers = 1;
  uint64_t n = 0;
  double wall_ms = 0.0;
  double speedup = 1.0;     // T(1) / T(p)
  double efficiency = 1.0;  // speedup / p for strong, T(1)/T(p) for weak
  double updates_per_ms = 0.0;
};

inline std::vector<ScalePoint> scaling_report(const ScaleSpec& spec) {
  if (spec.worker_counts.empty() ||
      std::find(spec.worker_counts.begin(), spec.worker_counts.end(), 1) ==
          spec.worker_counts.end()) {
    throw ConfigError("scaling needs the single-worker baseline in the worker set");
  }
  std::vector<ScalePoint> points;
  double baseline_ms = 0.0;
  for (const int p : spec.worker_counts) {
    ExperimentParams params = spec.base;
    params.workers = p;
    params.n = spec.mode == ScaleMode::strong
                   ? spec.n
                   : spec.n * static_cast<uint64_t>(p);
    const auto records = generate(make_stream_spec(params));
    const double t = default_query_time(params, records);
    double best_ms = 0.0;
    for (int rep = 0; rep < spec.repetitions; ++rep) {
      ParallelRun run = run_parallel(records, p, make_config(params),
                                     SketchDims{params.depth, params.width},
                                     params.transport, t);
      if (rep == 0 || run.total_ms < best_ms) {
        best_ms = run.total_ms;
      }
    }
    if (p == 1) {
      baseline_ms = best_ms;
    }
    ScalePoint point;
    point.mode = spec.mode == ScaleMode::strong ? "strong" : "weak";
    point.workers = p;
    point.n = params.n;
    point.wall_ms = best_ms;
    point.updates_per_ms = updates_per_ms(records.size(), best_ms);
    points.push_back(point);
  }
  for (ScalePoint& point : points) {
    point.speedup = baseline_ms / point.wall_ms;
    point.efficiency = spec.mode == ScaleMode::strong
                           ? point.speedup / point.workers
                           : point.speedup;
  }
  return points;
}

inline std::string scale_csv_header() {
  return "mode,workers,n,wall_ms,speedup,efficiency,updates_per_ms\n";
}

inline std::string to_csv(const ScalePoint& p) {
  std::string out;
  out += p.mode;
  out += ',';
  out += std::to_string(p.workers);
  out += ',';
  out += std::to_string(p.n);
  out += ',';
  out += format_double(p.wall_ms);
  out += ',';
  out += format_double(p.speedup);
  out += ',';
  out += format_double(p.efficiency);
  out += ',';
  out += format_double(p.updates_per_ms);
  out += '\n';
  return out;
}

}  // namespace faded
