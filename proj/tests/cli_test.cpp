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

#include <sys/wait.h>
#include <unistd.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "faded/metrics.hpp"
#include "faded/stream.hpp"

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string command = std::string(FADED_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult result;
  char buffer[4096];
  size_t got = 0;
  while ((got = fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
    result.output.append(buffer, got);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) {
    fields.push_back(field);
  }
  return fields;
}

// CSV text with the run-to-run timing columns removed.
std::string strip_timing_columns(const std::string& csv) {
  const auto lines = split_lines(csv);
  REQUIRE(!lines.empty());
  const auto header = split_fields(lines[0]);
  std::vector<size_t> keep;
  for (size_t i = 0; i < header.size(); ++i) {
    bool timing = false;
    for (const auto& t : faded::timing_columns()) {
      timing = timing || header[i] == t;
    }
    if (!timing) {
      keep.push_back(i);
    }
  }
  std::string out;
  for (const auto& line : lines) {
    const auto fields = split_fields(line);
    for (size_t k = 0; k < keep.size(); ++k) {
      if (keep[k] < fields.size()) {
        out += fields[keep[k]];
      }
      out += k + 1 < keep.size() ? ',' : '\n';
    }
  }
  return out;
}

}  // namespace

TEST_CASE("cli: gen is deterministic and loadable") {
  const auto a = temp_file("faded_cli_gen_a.bin");
  const auto b = temp_file("faded_cli_gen_b.bin");
  REQUIRE(run_cli("gen --n 5000 --m 500 --rho 1.4 --gen-seed 12 --out " + a.string())
              .exit_code == 0);
  REQUIRE(run_cli("gen --n 5000 --m 500 --rho 1.4 --gen-seed 12 --out " + b.string())
              .exit_code == 0);
  const auto read_bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  CHECK(read_bytes(a) == read_bytes(b));
  CHECK(faded::read_dataset(a).size() == 5000);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("cli: run scores a dataset") {
  const auto data = temp_file("faded_cli_run.bin");
  REQUIRE(run_cli("gen --n 20000 --m 2000 --rho 1.2 --gen-seed 3 --out " + data.string())
              .exit_code == 0);
  const auto result = run_cli("run --dataset " + data.string() +
                              " --decay exp --lambda 0.00005 --workers 2 --phi 0.01");
  REQUIRE(result.exit_code == 0);
  const auto lines = split_lines(result.output);
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0] == faded::metrics_csv_header().substr(0, lines[0].size()));
  const auto header = split_fields(lines[0]);
  const auto fields = split_fields(lines[1]);
  REQUIRE(header.size() == fields.size());
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "precision" || header[i] == "recall") {
      CHECK(fields[i] == "1");
    }
  }
  std::filesystem::remove(data);
}

TEST_CASE("cli: json output parses") {
  const auto result =
      run_cli("run --n 10000 --m 1000 --decay exp --format json --workers 2");
  REQUIRE(result.exit_code == 0);
  const auto parsed = nlohmann::json::parse(result.output);
  CHECK(parsed["metrics"]["recall"] == 1.0);
  CHECK(parsed["items"].is_array());
  CHECK(!parsed["items"].empty());
}

TEST_CASE("cli: exit codes") {
  // config errors
  CHECK(run_cli("run --dataset /nonexistent/file.bin").exit_code == 2);
  CHECK(run_cli("run --decay sideways").exit_code == 2);
  CHECK(run_cli("run --epsilon 0.01 --width 100").exit_code == 2);
  CHECK(run_cli("scale --p-set 2,4 --n 1000").exit_code == 2);
  // threshold violation: precision above 1 is unreachable
  CHECK(run_cli("run --n 5000 --m 500 --assert --min-precision 1.5").exit_code == 3);
  // success
  CHECK(run_cli("run --n 5000 --m 500 --assert").exit_code == 0);
}

TEST_CASE("cli: grid accuracy columns are reproducible") {
  const std::string args =
      "grid --vary p --values 1,2 --reps 2 --n 20000 --m 2000 --decay exp";
  const auto first = run_cli(args);
  const auto second = run_cli(args);
  REQUIRE(first.exit_code == 0);
  REQUIRE(second.exit_code == 0);
  CHECK(first.output != second.output);  // timing columns differ...
  CHECK(strip_timing_columns(first.output) == strip_timing_columns(second.output));

  // 2 values x (2 runs + 3 aggregates) + header
  CHECK(split_lines(first.output).size() == 1 + 2 * 5);
}

TEST_CASE("cli: scale output") {
  const auto result = run_cli("scale --mode strong --p-set 1,2 --n 100000 --reps 1");
  REQUIRE(result.exit_code == 0);
  const auto lines = split_lines(result.output);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "mode,workers,n,wall_ms,speedup,efficiency,updates_per_ms");
  const auto baseline = split_fields(lines[1]);
  CHECK(baseline[0] == "strong");
  CHECK(baseline[1] == "1");
  CHECK(baseline[4] == "1");
  CHECK(baseline[5] == "1");

  const auto weak = run_cli("scale --mode weak --p-set 1,2 --n 50000 --reps 1");
  REQUIRE(weak.exit_code == 0);
  const auto weak_lines = split_lines(weak.output);
  REQUIRE(weak_lines.size() == 3);
  CHECK(split_fields(weak_lines[2])[2] == "100000");  // n scales with workers
}

TEST_CASE("cli: config file mirrors flags") {
  const auto config = temp_file("faded_cli_config.ini");
  {
    std::ofstream out(config);
    out << "[run]\nn=15000\nm=1500\nrho=1.3\ndecay=exp\nworkers=2\nphi=0.02\n";
  }
  const auto from_file = run_cli("--config " + config.string() + " run");
  const auto from_flags =
      run_cli("run --n 15000 --m 1500 --rho 1.3 --decay exp --workers 2 --phi 0.02");
  REQUIRE(from_file.exit_code == 0);
  REQUIRE(from_flags.exit_code == 0);
  CHECK(strip_timing_columns(from_file.output) == strip_timing_columns(from_flags.output));
  std::filesystem::remove(config);
}

TEST_CASE("cli: multi-process tcp run matches in-process") {
  const auto data = temp_file("faded_cli_tcp.bin");
  REQUIRE(run_cli("gen --n 8000 --m 800 --rho 1.3 --gen-seed 6 --out " + data.string())
              .exit_code == 0);
  const uint16_t port = static_cast<uint16_t>(39200 + (getpid() % 1000));
  const std::string endpoint = "127.0.0.1:" + std::to_string(port);
  const std::string shared = " --dataset " + data.string() +
                             " --decay exp --lambda 0.0001 --phi 0.01 --workers 2"
                             " --transport tcp";

  CliResult coordinator;
  std::thread coordinator_thread([&] {
    coordinator = run_cli("run" + shared + " --worker-index 0 --listen " + endpoint +
                          " --format json");
  });
  const auto worker =
      run_cli("run" + shared + " --worker-index 1 --connect " + endpoint);
  coordinator_thread.join();
  REQUIRE(worker.exit_code == 0);
  REQUIRE(coordinator.exit_code == 0);

  const auto inproc = run_cli("run --dataset " + data.string() +
                              " --decay exp --lambda 0.0001 --phi 0.01 --workers 2"
                              " --format json");
  REQUIRE(inproc.exit_code == 0);
  const auto tcp_json = nlohmann::json::parse(coordinator.output);
  const auto inproc_json = nlohmann::json::parse(inproc.output);
  CHECK(tcp_json["items"] == inproc_json["items"]);
  std::filesystem::remove(data);
}
