// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
//
// Drives the installed command-line binary end to end. The test runner
// exports QGRAPH_CLI with the binary path; without it (CLI build disabled)
// these cases skip themselves.
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "qgraph/graph_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

#define REQUIRE_CLI()                               \
  do {                                              \
    if (!std::getenv("QGRAPH_CLI")) {               \
      MESSAGE("QGRAPH_CLI not set; skipping");      \
      return;                                       \
    }                                               \
  } while (0)

// Runs the binary with the given arguments; returns its exit code.
int cli(const std::string& args) {
  std::string cmd = std::string("\"") + std::getenv("QGRAPH_CLI") + "\" " +
                    args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

// Scratch directory per test case, cleaned up on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("qgraph_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

json load_json(const std::string& file) {
  return json::parse(qgraph::read_text_file(file));
}

}  // namespace

TEST_CASE("cli workflow: calibrate, quantize, run, compare") {
  REQUIRE_CLI();
  TempDir dir("flow");
  const std::string model = dir / "model.json";
  const std::string corpus = dir / "corpus.jsonl";
  const std::string table = dir / "table.json";
  const std::string int8 = dir / "int8.json";

  REQUIRE(cli("gen-model --out " + model + " --seed 1") == 0);
  REQUIRE(cli("gen-corpus --out " + corpus + " --count 80 --seed 2") == 0);
  REQUIRE(cli("calibrate --graph " + model + " --corpus " + corpus +
              " --samples 60 --seed 3 --out " + table) == 0);
  REQUIRE(cli("quantize --graph " + model + " --table " + table +
              " --passes calibrated,gathernd --out " + int8 +
              " --emit-pass-report " + (dir / "passes.json")) == 0);
  REQUIRE(cli("run --graph " + int8 + " --corpus " + corpus + " --out " +
              (dir / "results.jsonl") + " --workers 2 --report " +
              (dir / "report.json")) == 0);
  CHECK(cli("compare --fp32 " + model + " --int8 " + int8 + " --corpus " +
            corpus + " --samples 8 --seed 4 --tol 5e-2") == 0);

  // The pass report names both passes; the compare report records a pass.
  auto passes = load_json(dir / "passes.json");
  REQUIRE(passes.size() == 2);
  CHECK(passes[0].at("pass") == "calibrated_quantize");
  CHECK(passes[1].at("pass") == "quantize_gathernd");

  REQUIRE(cli("compare --fp32 " + model + " --int8 " + int8 + " --corpus " +
              corpus + " --samples 8 --seed 4 --tol 5e-2 --report " +
              (dir / "cmp.json")) == 0);
  auto cmp = load_json(dir / "cmp.json");
  CHECK(cmp.at("pass") == true);
  CHECK(cmp.at("worst_rel_l2").get<double>() <= 5e-2);

  // Identity comparison: a graph matches itself exactly.
  REQUIRE(cli("compare --fp32 " + model + " --int8 " + model + " --corpus " +
              corpus + " --samples 4 --tol 0 --report " +
              (dir / "ident.json")) == 0);
  CHECK(load_json(dir / "ident.json").at("worst_rel_l2").get<double>() == 0.0);
}

TEST_CASE("cli calibrate is deterministic under a fixed seed") {
  REQUIRE_CLI();
  TempDir dir("det");
  const std::string model = dir / "model.json";
  const std::string corpus = dir / "corpus.jsonl";

  REQUIRE(cli("gen-model --out " + model + " --seed 1") == 0);
  REQUIRE(cli("gen-corpus --out " + corpus + " --count 80 --seed 2") == 0);
  REQUIRE(cli("calibrate --graph " + model + " --corpus " + corpus +
              " --samples 30 --seed 5 --out " + (dir / "a.json")) == 0);
  REQUIRE(cli("calibrate --graph " + model + " --corpus " + corpus +
              " --samples 30 --seed 5 --out " + (dir / "b.json")) == 0);
  CHECK(qgraph::read_text_file(dir / "a.json") ==
        qgraph::read_text_file(dir / "b.json"));

  // QGRAPH_SEED is the fallback when --seed is absent.
  std::string cmd = std::string("QGRAPH_SEED=5 \"") +
                    std::getenv("QGRAPH_CLI") + "\" calibrate --graph " +
                    model + " --corpus " + corpus + " --samples 30 --out " +
                    (dir / "env.json") + " > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(qgraph::read_text_file(dir / "a.json") ==
        qgraph::read_text_file(dir / "env.json"));
}

TEST_CASE("cli run: worker counts agree, sorting cuts padding") {
  REQUIRE_CLI();
  TempDir dir("run");
  const std::string model = dir / "model.json";
  const std::string corpus = dir / "corpus.jsonl";

  REQUIRE(cli("gen-model --out " + model + " --seed 1") == 0);
  REQUIRE(cli("gen-corpus --out " + corpus + " --count 80 --seed 2") == 0);

  REQUIRE(cli("run --graph " + model + " --corpus " + corpus + " --out " +
              (dir / "w1.jsonl") + " --workers 1 --report " +
              (dir / "w1.json")) == 0);
  REQUIRE(cli("run --graph " + model + " --corpus " + corpus + " --out " +
              (dir / "w4.jsonl") + " --workers 4 --report " +
              (dir / "w4.json")) == 0);
  CHECK(qgraph::read_text_file(dir / "w1.jsonl") ==
        qgraph::read_text_file(dir / "w4.jsonl"));
  CHECK(load_json(dir / "w1.json")["runs"][0].at("output_hash") ==
        load_json(dir / "w4.json")["runs"][0].at("output_hash"));

  auto waste = [&](const std::string& sort) {
    REQUIRE(cli("run --graph " + model + " --corpus " + corpus + " --out " +
                (dir / "r.jsonl") + " --sort " + sort + " --report " +
                (dir / "r.json")) == 0);
    return load_json(dir / "r.json")["runs"][0]
        .at("padding_waste_pct")
        .get<double>();
  };
  double tokens = waste("tokens");
  double words = waste("words");
  double none = waste("none");
  CHECK(tokens <= words);
  CHECK(words <= none);

  // An empty corpus is a clean no-op run.
  std::ofstream(dir / "empty.jsonl").close();
  REQUIRE(cli("run --graph " + model + " --corpus " + (dir / "empty.jsonl") +
              " --out " + (dir / "r0.jsonl") + " --report " +
              (dir / "rep0.json")) == 0);
  CHECK(qgraph::read_text_file(dir / "r0.jsonl").empty());
}

TEST_CASE("cli exit codes distinguish the failure classes") {
  REQUIRE_CLI();
  TempDir dir("exit");
  const std::string model = dir / "model.json";
  const std::string corpus = dir / "corpus.jsonl";

  REQUIRE(cli("gen-model --out " + model + " --seed 1") == 0);
  REQUIRE(cli("gen-corpus --out " + corpus + " --count 20 --seed 2") == 0);

  // 1: unreadable input file.
  CHECK(cli("run --graph " + model + " --corpus " + (dir / "missing.jsonl") +
            " --out " + (dir / "r.jsonl")) == 1);
  // 2: validation problems (unknown pass, bad sort key, bad flags).
  CHECK(cli("quantize --graph " + model + " --passes bogus --out " +
            (dir / "x.json")) == 2);
  CHECK(cli("run --graph " + model + " --corpus " + corpus + " --out " +
            (dir / "r.jsonl") + " --sort length") == 2);
  CHECK(cli("quantize --graph " + model + " --passes calibrated --out " +
            (dir / "x.json")) == 2);  // calibrated pass without --table
  CHECK(cli("frobnicate") == 2);
  // 3: calibration cannot proceed.
  CHECK(cli("calibrate --graph " + model + " --corpus " + corpus +
            " --samples 600 --seed 3 --out " + (dir / "t.json")) == 3);
  // 6: tolerance gate trips on a naive rewrite of long-tailed weights.
  const std::string lt = dir / "lt.json";
  const std::string lt_naive = dir / "lt_naive.json";
  REQUIRE(cli("gen-model --out " + lt +
              " --preset long-tailed --sigma 0.5 --seed 1") == 0);
  REQUIRE(cli("quantize --graph " + lt + " --passes naive --out " + lt_naive) ==
          0);
  CHECK(cli("compare --fp32 " + lt + " --int8 " + lt_naive + " --corpus " +
            corpus + " --samples 8 --seed 4 --tol 5e-2") == 6);
}
