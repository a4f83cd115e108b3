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

// Experiment driver for the time-faded heavy hitter sketch: generate
// synthetic streams, run single experiments or parameter grids against the
// exact oracle, and measure parallel scaling.
//
// Exit codes: 0 success, 2 configuration or input error, 3 a threshold
// requested via --assert (or the assert subcommand) was violated.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faded/faded.hpp"

namespace {

using nlohmann::json;

struct CommonOptions {
  // stream source
  std::string dataset;
  uint64_t n = 1'000'000;
  uint64_t m = 100'000;
  double rho = 1.1;
  uint64_t gen_seed = 1;
  std::string timestamps = "index";
  double rate = 1.0;

  // sketch
  double phi = 0.01;
  double epsilon = 0.0;
  double delta = 0.0;
  uint32_t width = 1340;
  uint32_t depth = 4;
  uint64_t seed = 1;
  double query_time = std::numeric_limits<double>::quiet_NaN();

  // decay
  std::string decay = "none";
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double beta = 1.0;
  double landmark = 0.0;

  // harness
  int workers = 1;
  std::string transport = "inproc";
  std::string listen;
  std::string connect;
  int worker_index = -1;

  // output
  std::string format = "csv";
  std::string out;
  bool score = true;
  bool print_items = false;

  // thresholds
  bool assert_thresholds = false;
  double min_recall = 1.0;
  double min_precision = 0.98;
};

void add_stream_flags(CLI::App* cmd, CommonOptions& opt, bool with_dataset) {
  if (with_dataset) {
    cmd->add_option("--dataset", opt.dataset,
                    "Load records from a file (.csv or binary) instead of generating");
  }
  cmd->add_option("--n", opt.n, "Stream length");
  cmd->add_option("--m", opt.m, "Universe size");
  cmd->add_option("--rho", opt.rho, "Zipf skew");
  cmd->add_option("--gen-seed", opt.gen_seed, "Stream generator seed");
  cmd->add_option("--timestamps", opt.timestamps, "Timestamp model: index or poisson")
      ->check(CLI::IsMember({"index", "poisson"}));
  cmd->add_option("--rate", opt.rate, "Poisson arrival rate");
}

void add_sketch_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--phi", opt.phi, "Support threshold in (0,1)");
  auto* eps = cmd->add_option("--epsilon", opt.epsilon, "Error target; sets the width");
  auto* width = cmd->add_option("--width,-w", opt.width, "Columns per row");
  eps->excludes(width);
  width->excludes(eps);
  auto* delta = cmd->add_option("--delta", opt.delta, "Failure probability; sets the depth");
  auto* depth = cmd->add_option("--depth,-d", opt.depth, "Row count");
  delta->excludes(depth);
  depth->excludes(delta);
  cmd->add_option("--seed", opt.seed, "Hash seed");
  cmd->add_option("--query-time", opt.query_time,
                  "Query time (defaults to the newest timestamp)");
  cmd->add_option("--decay", opt.decay, "Decay kind")
      ->check(CLI::IsMember({"none", "exp", "poly"}));
  cmd->add_option("--lambda", opt.lambda, "Exponential rate (defaults to 1/n)");
  cmd->add_option("--beta", opt.beta, "Polynomial exponent");
  cmd->add_option("--landmark", opt.landmark, "Landmark time");
}

void add_harness_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--workers,-p", opt.workers, "Worker count");
  cmd->add_option("--transport", opt.transport, "Reduction transport")
      ->check(CLI::IsMember({"inproc", "tcp"}));
  cmd->add_option("--listen", opt.listen, "Coordinator bootstrap address (tcp, worker 0)");
  cmd->add_option("--connect", opt.connect, "Coordinator address to join (tcp, workers 1+)");
  cmd->add_option("--worker-index", opt.worker_index,
                  "This process' worker index in a multi-process tcp run");
}

void add_output_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--format", opt.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", opt.out, "Write output to a file instead of stdout");
}

faded::DecayKind decay_kind_of(const std::string& name) {
  if (name == "none") return faded::DecayKind::none;
  if (name == "exp") return faded::DecayKind::exponential;
  return faded::DecayKind::polynomial;
}

faded::ExperimentParams to_params(const CommonOptions& opt) {
  faded::ExperimentParams p;
  p.n = opt.n;
  p.m = opt.m;
  p.rho = opt.rho;
  p.phi = opt.phi;
  p.width = opt.epsilon > 0.0 ? faded::dims_from_params(opt.epsilon, 0.5).width : opt.width;
  p.depth = opt.delta > 0.0 ? faded::dims_from_params(0.5, opt.delta).depth : opt.depth;
  p.workers = opt.workers;
  p.decay_kind = decay_kind_of(opt.decay);
  if (!std::isnan(opt.lambda)) {
    p.lambda = opt.lambda;
  }
  p.beta = opt.beta;
  p.landmark = opt.landmark;
  p.stream_seed = opt.gen_seed;
  p.hash_seed = opt.seed;
  p.timestamps = opt.timestamps == "poisson" ? faded::TimestampModel::poisson
                                             : faded::TimestampModel::index;
  p.arrival_rate = opt.rate;
  p.transport = opt.transport == "tcp" ? faded::TransportKind::tcp
                                       : faded::TransportKind::inproc;
  if (!std::isnan(opt.query_time)) {
    p.query_time = opt.query_time;
  }
  return p;
}

void write_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    throw faded::ConfigError("cannot open output file: " + out_path);
  }
  out << text;
}

json row_to_json(const faded::MetricsRow& row) {
  return json{{"n", row.n},
              {"m", row.m},
              {"rho", row.rho},
              {"phi", row.phi},
              {"width", row.width},
              {"depth", row.depth},
              {"workers", row.workers},
              {"seed", row.seed},
              {"rep", row.repetition},
              {"stat", row.stat},
              {"exact", row.exact_count},
              {"reported", row.reported_count},
              {"true_pos", row.true_positives},
              {"precision", row.precision},
              {"recall", row.recall},
              {"abs_err_mean", row.abs_err_mean},
              {"abs_err_max", row.abs_err_max},
              {"are_mean", row.are_mean},
              {"are_max", row.are_max},
              {"updates_per_ms", row.updates_per_ms},
              {"ingest_ms", row.ingest_ms}};
}

int check_thresholds(const CommonOptions& opt, const std::vector<faded::MetricsRow>& rows) {
  if (!opt.assert_thresholds) {
    return 0;
  }
  int violations = 0;
  for (const auto& row : rows) {
    if (row.stat != "run") {
      continue;
    }
    if (row.recall < opt.min_recall) {
      std::cerr << "threshold violated: recall " << row.recall << " < " << opt.min_recall
                << " (seed " << row.seed << ", workers " << row.workers << ")\n";
      ++violations;
    }
    if (row.precision < opt.min_precision) {
      std::cerr << "threshold violated: precision " << row.precision << " < "
                << opt.min_precision << " (seed " << row.seed << ", workers "
                << row.workers << ")\n";
      ++violations;
    }
  }
  return violations == 0 ? 0 : 3;
}

// ---------------------------------------------------------------------------

int cmd_gen(const CommonOptions& opt, bool csv) {
  if (opt.out.empty()) {
    throw faded::ConfigError("gen requires --out");
  }
  const auto records = faded::generate(
      {opt.n, opt.m, opt.rho, opt.gen_seed,
       opt.timestamps == "poisson" ? faded::TimestampModel::poisson
                                   : faded::TimestampModel::index,
       opt.rate});
  if (csv) {
    faded::write_dataset_csv(opt.out, records);
  } else {
    faded::write_dataset(opt.out, records);
  }
  std::cerr << "wrote " << records.size() << " records to " << opt.out << "\n";
  return 0;
}

std::vector<faded::StreamRecord> load_or_generate(const CommonOptions& opt) {
  if (!opt.dataset.empty()) {
    return faded::read_dataset(opt.dataset);
  }
  return faded::generate(faded::make_stream_spec(to_params(opt)));
}

int run_tcp_process(const CommonOptions& opt) {
  if (opt.worker_index < 0) {
    throw faded::ConfigError("multi-process tcp mode needs --worker-index");
  }
  const auto records = load_or_generate(opt);
  const faded::ExperimentParams params = to_params(opt);
  const double t = faded::default_query_time(params, records);
  std::unique_ptr<faded::TcpProcessEndpoint> endpoint;
  if (opt.worker_index == 0) {
    if (opt.listen.empty()) {
      throw faded::ConfigError("worker 0 needs --listen");
    }
    endpoint = std::make_unique<faded::TcpProcessEndpoint>(opt.workers, opt.listen);
  } else {
    if (opt.connect.empty()) {
      throw faded::ConfigError("workers 1+ need --connect");
    }
    endpoint = std::make_unique<faded::TcpProcessEndpoint>(opt.worker_index, opt.workers,
                                                           opt.connect);
  }
  auto result = faded::run_process_worker(records, opt.worker_index, opt.workers,
                                          faded::make_config(params),
                                          faded::SketchDims{params.depth, params.width},
                                          *endpoint, t);
  if (!result) {
    return 0;  // non-coordinator: contributed and exits
  }
  json out = {{"workers", opt.workers},
              {"records", records.size()},
              {"query_time", t},
              {"normalized_total", result->report.normalized_total},
              {"items", json::array()}};
  for (const auto& e : result->report.entries) {
    out["items"].push_back({{"item", e.item}, {"frequency", e.frequency}});
  }
  write_text(opt.out, out.dump(2) + "\n");
  return 0;
}

int cmd_run(const CommonOptions& opt) {
  if (opt.transport == "tcp" && (!opt.listen.empty() || !opt.connect.empty())) {
    return run_tcp_process(opt);
  }
  const auto records = load_or_generate(opt);
  faded::ExperimentParams params = to_params(opt);
  params.n = records.size();
  if (!opt.dataset.empty()) {
    params.m = 0;  // unknown for external data
  }
  const double t = faded::default_query_time(params, records);

  faded::ParallelRun run =
      faded::run_parallel(records, params.workers, faded::make_config(params),
                          faded::SketchDims{params.depth, params.width}, params.transport, t);

  std::vector<faded::MetricsRow> rows;
  if (opt.score) {
    const faded::ExactOracle oracle(records, faded::make_decay(params));
    faded::MetricsRow row = faded::score(run.report, oracle, params.phi, t);
    row.n = params.n;
    row.m = params.m;
    row.rho = opt.dataset.empty() ? params.rho : 0.0;
    row.width = params.width;
    row.depth = params.depth;
    row.workers = params.workers;
    row.seed = params.hash_seed;
    row.ingest_ms = run.ingest_ms;
    row.updates_per_ms = faded::updates_per_ms(run.records, run.ingest_ms);
    rows.push_back(row);
  }

  std::string text;
  if (opt.format == "csv") {
    if (!rows.empty()) {
      text += faded::metrics_csv_header();
      text += faded::to_csv(rows[0]);
    }
    if (opt.print_items || rows.empty()) {
      text += "item,frequency\n";
      for (const auto& e : run.report.entries) {
        text += std::to_string(e.item) + "," + faded::format_double(e.frequency) + "\n";
      }
    }
  } else {
    json out;
    out["query_time"] = t;
    out["normalized_total"] = run.report.normalized_total;
    out["ingest_ms"] = run.ingest_ms;
    if (!rows.empty()) {
      out["metrics"] = row_to_json(rows[0]);
    }
    out["items"] = json::array();
    for (const auto& e : run.report.entries) {
      out["items"].push_back({{"item", e.item}, {"frequency", e.frequency}});
    }
    text = out.dump(2) + "\n";
  }
  write_text(opt.out, text);
  return check_thresholds(opt, rows);
}

int cmd_grid(const CommonOptions& opt, const std::string& vary,
             const std::vector<double>& values, int reps) {
  faded::ExperimentGrid grid;
  grid.axis = faded::axis_from_name(vary);
  grid.values = values;
  grid.repetitions = reps;
  grid.base = to_params(opt);
  const auto rows = faded::run_experiment(grid);

  std::string text;
  if (opt.format == "csv") {
    text += faded::metrics_csv_header();
    for (const auto& row : rows) {
      text += faded::to_csv(row);
    }
  } else {
    json out = json::array();
    for (const auto& row : rows) {
      out.push_back(row_to_json(row));
    }
    text = out.dump(2) + "\n";
  }
  write_text(opt.out, text);
  return check_thresholds(opt, rows);
}

int cmd_scale(const CommonOptions& opt, const std::string& mode,
              const std::vector<int>& worker_counts, int reps) {
  faded::ScaleSpec spec;
  spec.mode = mode == "weak" ? faded::ScaleMode::weak : faded::ScaleMode::strong;
  spec.worker_counts = worker_counts;
  spec.n = opt.n;
  spec.repetitions = reps;
  spec.base = to_params(opt);
  const auto points = faded::scaling_report(spec);

  std::string text;
  if (opt.format == "csv") {
    text += faded::scale_csv_header();
    for (const auto& point : points) {
      text += faded::to_csv(point);
    }
  } else {
    json out = json::array();
    for (const auto& point : points) {
      out.push_back({{"mode", point.mode},
                     {"workers", point.workers},
                     {"n", point.n},
                     {"wall_ms", point.wall_ms},
                     {"speedup", point.speedup},
                     {"efficiency", point.efficiency},
                     {"updates_per_ms", point.updates_per_ms}});
    }
    text = out.dump(2) + "\n";
  }
  write_text(opt.out, text);
  return 0;
}

// Compact accuracy bundle: a reduced version of the full experiment grid
// with hard thresholds, meant as a quick gate for CI-style usage.
int cmd_assert(const CommonOptions& opt) {
  int violations = 0;
  const uint64_t n = 200'000;
  for (const double rho : {1.1, 2.2}) {
    for (int rep = 0; rep < 2; ++rep) {
      faded::ExperimentParams params = to_params(opt);
      params.n = n;
      params.m = 20'000;
      params.rho = rho;
      params.phi = 0.01;
      params.width = 1340;
      params.depth = 4;
      params.decay_kind = faded::DecayKind::exponential;
      params.lambda.reset();
      params.stream_seed = 100 + rep;
      params.hash_seed = 200 + rep;
      const auto records = faded::generate(faded::make_stream_spec(params));
      const faded::ExactOracle oracle(records, faded::make_decay(params));
      const double epsilon = std::numbers::e / (2.0 * params.width);
      for (const int p : {1, 4}) {
        params.workers = p;
        const auto outcome = faded::run_once(params, records, oracle);
        if (outcome.row.recall < 1.0) {
          std::cerr << "assert: recall " << outcome.row.recall << " at rho " << rho
                    << " p " << p << " rep " << rep << "\n";
          ++violations;
        }
        if (outcome.row.precision < 0.98) {
          std::cerr << "assert: precision " << outcome.row.precision << " at rho " << rho
                    << " p " << p << " rep " << rep << "\n";
          ++violations;
        }
        for (const auto& e : outcome.report.entries) {
          if (oracle.raw(e.item) <= (params.phi - epsilon) * oracle.total_raw()) {
            std::cerr << "assert: reported item " << e.item
                      << " sits below the (phi - epsilon) line\n";
            ++violations;
          }
        }
      }
    }
  }
  if (violations == 0) {
    std::cout << "all assertions passed\n";
    return 0;
  }
  std::cout << violations << " assertion(s) failed\n";
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-faded heavy hitters over a mergeable two-counter sketch"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value file with [subcommand] sections mirroring the flags");

  CommonOptions opt;
  bool gen_csv = false;
  std::string vary = "workers";
  std::vector<double> values;
  int reps = 1;
  std::string scale_mode = "strong";
  std::vector<int> worker_counts;
  int scale_reps = 3;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic zipf dataset");
  add_stream_flags(gen, opt, false);
  gen->add_option("--out", opt.out, "Output file")->required();
  gen->add_flag("--csv", gen_csv, "Write CSV instead of the binary format");

  auto* run = app.add_subcommand("run", "Run one experiment");
  add_stream_flags(run, opt, true);
  add_sketch_flags(run, opt);
  add_harness_flags(run, opt);
  add_output_flags(run, opt);
  run->add_flag("--print-items", opt.print_items, "Also list the reported items");
  run->add_flag("!--no-score", opt.score, "Skip the exact oracle and metrics");
  run->add_flag("--assert", opt.assert_thresholds, "Fail (exit 3) below thresholds");
  run->add_option("--min-recall", opt.min_recall, "Recall threshold for --assert");
  run->add_option("--min-precision", opt.min_precision, "Precision threshold for --assert");

  auto* grid = app.add_subcommand("grid", "Vary one axis, everything else fixed");
  add_stream_flags(grid, opt, false);
  add_sketch_flags(grid, opt);
  add_harness_flags(grid, opt);
  add_output_flags(grid, opt);
  grid->add_option("--vary", vary, "Axis: n, rho, phi, width, workers")->required();
  grid->add_option("--values", values, "Axis values")->required()->delimiter(',');
  grid->add_option("--reps", reps, "Repetitions (distinct seeds) per cell");
  grid->add_flag("--assert", opt.assert_thresholds, "Fail (exit 3) below thresholds");
  grid->add_option("--min-recall", opt.min_recall, "Recall threshold for --assert");
  grid->add_option("--min-precision", opt.min_precision, "Precision threshold for --assert");

  auto* scale = app.add_subcommand("scale", "Strong or weak scaling timings");
  add_stream_flags(scale, opt, false);
  add_sketch_flags(scale, opt);
  add_output_flags(scale, opt);
  scale->add_option("--mode", scale_mode, "strong (fixed total) or weak (fixed per worker)")
      ->check(CLI::IsMember({"strong", "weak"}));
  scale->add_option("--p-set", worker_counts, "Worker counts, must include 1")
      ->required()
      ->delimiter(',');
  scale->add_option("--reps", scale_reps, "Timing repetitions, best is kept");

  auto* assert_cmd = app.add_subcommand("assert", "Run the built-in accuracy gate");
  add_sketch_flags(assert_cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(opt, gen_csv);
    }
    if (run->parsed()) {
      return cmd_run(opt);
    }
    if (grid->parsed()) {
      return cmd_grid(opt, vary, values, reps);
    }
    if (scale->parsed()) {
      return cmd_scale(opt, scale_mode, worker_counts, scale_reps);
    }
    if (assert_cmd->parsed()) {
      return cmd_assert(opt);
    }
  } catch (const faded::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const faded::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
