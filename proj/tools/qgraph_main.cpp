// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
//
// qgraph command line: generate toy models and synthetic corpora, calibrate
// activation thresholds, rewrite graphs to INT8, run batched inference, and
// gate INT8 accuracy against the FP32 reference.

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qgraph/calibration.hpp"
#include "qgraph/error.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/pipeline.hpp"
#include "qgraph/rewriter.hpp"
#include "qgraph/rng.hpp"
#include "qgraph/toy_model.hpp"

namespace {

using namespace qgraph;
using nlohmann::json;

// Stable exit codes, documented in the README:
//   0 success          1 file I/O         2 invalid input or graph
//   3 calibration      4 missing tap      5 worker failure
//   6 tolerance exceeded
constexpr int kToleranceExit = 6;

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::IoError:
      return 1;
    case Errc::UnknownTap:
    case Errc::EmptyHistogram:
    case Errc::SupportMismatch:
    case Errc::InsufficientMass:
      return 3;
    case Errc::MissingTapEntry:
      return 4;
    case Errc::WorkerFailure:
      return 5;
    default:
      return 2;
  }
}

WeightPreset preset_from_name(const std::string& s) {
  if (s == "gaussian") return WeightPreset::Gaussian;
  if (s == "long-tailed") return WeightPreset::LongTailed;
  fail(Errc::InvalidArgument, "unknown weight preset '" + s + "'");
}

// The commands feed sentences into the graph's single S32 placeholder.
std::string token_placeholder(const Graph& g) {
  std::string found;
  for (const auto& [id, n] : g.nodes()) {
    if (!n.is_placeholder() || n.attr_str("dtype") != "S32") continue;
    if (!found.empty())
      fail(Errc::InvalidArgument, "graph has multiple S32 placeholders ('" +
                                      found + "', '" + id + "')");
    found = id;
  }
  if (found.empty())
    fail(Errc::InvalidArgument, "graph has no S32 token placeholder");
  return found;
}

Feeds sentence_feed(const std::string& placeholder, const Sentence& s) {
  std::vector<int32_t> toks = s.tokens;
  int64_t len = static_cast<int64_t>(toks.size());
  Feeds f;
  f.emplace(placeholder, Tensor::s32({len, 1}, std::move(toks)));
  return f;
}

std::vector<Sentence> load_corpus(const std::string& file) {
  return corpus_from_jsonl(read_text_file(file));
}

struct GenModelArgs {
  std::string out;
  std::string preset = "gaussian";
  ToyConfig cfg;
};

int cmd_gen_model(const GenModelArgs& a) {
  ToyConfig cfg = a.cfg;
  cfg.preset = preset_from_name(a.preset);
  Graph g = build_toy_transformer(cfg);
  save_graph_file(g, a.out);
  std::printf("wrote %s: %zu nodes, %s weights, seed %llu\n", a.out.c_str(),
              g.size(), a.preset.c_str(),
              static_cast<unsigned long long>(cfg.seed));
  return 0;
}

struct GenCorpusArgs {
  std::string out;
  CorpusConfig cfg;
};

int cmd_gen_corpus(const GenCorpusArgs& a) {
  auto corpus = generate_corpus(a.cfg);
  write_text_file(a.out, corpus_to_jsonl(corpus));
  int64_t tokens = 0;
  for (const Sentence& s : corpus) tokens += static_cast<int64_t>(s.tokens.size());
  std::printf("wrote %s: %zu sentences, %lld tokens, seed %llu\n", a.out.c_str(),
              corpus.size(), static_cast<long long>(tokens),
              static_cast<unsigned long long>(a.cfg.seed));
  return 0;
}

struct CalibrateArgs {
  std::string graph;
  std::string corpus;
  std::string out;
  std::string mode = "conjugate";
  int64_t samples = 600;
  uint64_t seed = 0;
};

int cmd_calibrate(const CalibrateArgs& a) {
  Graph g = load_graph_file(a.graph);
  auto corpus = load_corpus(a.corpus);
  CalibMode mode = calib_mode_from_name(a.mode);
  if (a.samples < 1)
    fail(Errc::InvalidArgument, "--samples must be >= 1");
  if (static_cast<size_t>(a.samples) > corpus.size())
    fail(Errc::InsufficientMass,
         "requested " + std::to_string(a.samples) +
             " calibration samples, corpus holds " +
             std::to_string(corpus.size()));

  std::string placeholder = token_placeholder(g);
  Rng rng(a.seed);
  std::vector<Feeds> feeds;
  feeds.reserve(static_cast<size_t>(a.samples));
  for (size_t i : rng.sample_without_replacement(corpus.size(),
                                                 static_cast<size_t>(a.samples)))
    feeds.push_back(sentence_feed(placeholder, corpus[i]));

  CalibrationTable table = calibrate(g, feeds, default_taps(g), mode);
  write_text_file(a.out, table.to_json());

  std::map<DistClass, int64_t> by_class;
  for (const auto& [tap, tc] : table.taps) {
    ++by_class[tc.dist];
    std::printf("  %-28s %-8s [%+.6g, %+.6g] %s\n", tap.c_str(),
                dist_class_name(tc.dist), tc.thresholds.t_min,
                tc.thresholds.t_max, tc.quantize ? "int8" : "fp32");
  }
  std::printf("calibrated %zu taps (%lld gaussian, %lld narrow, %lld sparse) "
              "from %lld samples -> %s\n",
              table.taps.size(),
              static_cast<long long>(by_class[DistClass::Gaussian]),
              static_cast<long long>(by_class[DistClass::Narrow]),
              static_cast<long long>(by_class[DistClass::Sparse]),
              static_cast<long long>(a.samples), a.out.c_str());
  return 0;
}

struct QuantizeArgs {
  std::string graph;
  std::string table;
  std::string out;
  std::string report;
  std::vector<std::string> passes;
};

int cmd_quantize(const QuantizeArgs& a) {
  Graph g = load_graph_file(a.graph);
  CalibrationTable table;
  bool have_table = !a.table.empty();
  if (have_table) table = CalibrationTable::from_json(read_text_file(a.table));

  json reports = json::array();
  for (const std::string& name : a.passes) {
    std::pair<Graph, PassReport> result = [&] {
      if (name == "naive") return naive_quantize_pass(g);
      if (name == "calibrated" || name == "gathernd") {
        if (!have_table)
          fail(Errc::InvalidArgument, "pass '" + name + "' needs --table");
        return name == "calibrated" ? calibrated_quantize_pass(g, table)
                                    : quantize_gathernd_pass(g, table);
      }
      fail(Errc::InvalidArgument, "unknown pass '" + name + "'");
    }();
    g = std::move(result.first);
    const PassReport& r = result.second;
    std::printf("pass %-10s +%zu nodes, -%zu, %zu kind changes\n", r.pass.c_str(),
                r.added.size(), r.removed.size(), r.replaced.size());
    reports.push_back(json::parse(r.to_json()));
  }

  save_graph_file(g, a.out);
  if (!a.report.empty()) write_text_file(a.report, reports.dump(2) + "\n");
  std::printf("wrote %s: %zu nodes\n", a.out.c_str(), g.size());
  return 0;
}

struct RunArgs {
  std::string graph;
  std::string corpus;
  std::string out;
  std::string report;
  std::string sort = "tokens";
  int64_t batch = 8;
  int workers = 1;
  int repeat = 1;
};

int cmd_run(const RunArgs& a) {
  Graph g = load_graph_file(a.graph);
  auto corpus = load_corpus(a.corpus);
  SortKey key = sort_key_from_name(a.sort);
  if (a.repeat < 1) fail(Errc::InvalidArgument, "--repeat must be >= 1");

  sort_sentences(corpus, key);
  auto batches = make_batches(corpus, a.batch);

  std::vector<RunStats> rows;
  RunResult last;
  for (int i = 0; i < a.repeat; ++i) {
    last = a.workers <= 1 ? run_serial(g, batches)
                          : run_parallel(g, batches, a.workers);
    std::printf("%lld sentences / %lld batches, %s: %.3fs, hash %s\n",
                static_cast<long long>(last.stats.sentences),
                static_cast<long long>(last.stats.batches),
                last.stats.config.c_str(), last.stats.wall_seconds,
                hash_hex(last.stats.output_hash).c_str());
    rows.push_back(last.stats);
  }

  write_text_file(a.out, results_to_jsonl(last));
  std::string report = throughput_report(rows);
  if (!a.report.empty())
    write_text_file(a.report, report);
  else
    std::fputs(report.c_str(), stdout);
  return 0;
}

struct CompareArgs {
  std::string fp32;
  std::string int8;
  std::string corpus;
  std::string report;
  double tol = 5e-2;
  int64_t samples = 0;  // 0 = the whole corpus
  uint64_t seed = 0;
};

int cmd_compare(const CompareArgs& a) {
  Graph ref = load_graph_file(a.fp32);
  Graph quant = load_graph_file(a.int8);
  auto corpus = load_corpus(a.corpus);
  if (!(a.tol >= 0.0)) fail(Errc::InvalidArgument, "--tol must be >= 0");

  std::string placeholder = token_placeholder(ref);
  std::vector<const Sentence*> chosen;
  if (a.samples > 0 && static_cast<size_t>(a.samples) < corpus.size()) {
    Rng rng(a.seed);
    for (size_t i : rng.sample_without_replacement(
             corpus.size(), static_cast<size_t>(a.samples)))
      chosen.push_back(&corpus[i]);
  } else {
    for (const Sentence& s : corpus) chosen.push_back(&s);
  }
  std::vector<Feeds> feeds;
  feeds.reserve(chosen.size());
  for (const Sentence* s : chosen) feeds.push_back(sentence_feed(placeholder, *s));

  EquivalenceReport rep = verify_equivalence(ref, quant, feeds, a.tol);
  for (const OutputDelta& d : rep.outputs)
    std::printf("  %-20s max_abs %.6g  rel_l2 %.6g\n", d.output.c_str(),
                d.max_abs, d.rel_l2);
  if (!a.report.empty()) write_text_file(a.report, rep.to_json());

  if (rep.pass) {
    std::printf("within tolerance: worst rel-L2 %.6g <= %.6g over %zu feeds\n",
                rep.worst_rel_l2, a.tol, feeds.size());
    return 0;
  }
  std::printf("tolerance exceeded: worst rel-L2 %.6g > %.6g over %zu feeds\n",
              rep.worst_rel_l2, a.tol, feeds.size());
  return kToleranceExit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"INT8 quantization toolkit for qgraph compute graphs"};
  app.require_subcommand(1);

  GenModelArgs gm;
  CLI::App* gen_model = app.add_subcommand(
      "gen-model", "Generate a toy transformer graph file");
  gen_model->add_option("--out", gm.out, "output graph JSON")->required();
  gen_model->add_option("--preset", gm.preset, "gaussian|long-tailed");
  gen_model->add_option("--d", gm.cfg.d_model, "embedding width");
  gen_model->add_option("--heads", gm.cfg.heads, "attention heads");
  gen_model->add_option("--layers", gm.cfg.layers, "encoder layers");
  gen_model->add_option("--seq", gm.cfg.seq_len, "encoder sequence length");
  gen_model->add_option("--vocab", gm.cfg.vocab, "token vocabulary");
  gen_model->add_option("--steps", gm.cfg.decode_steps, "decoder loop steps");
  gen_model->add_option("--beam", gm.cfg.beam, "decoder beam width");
  gen_model->add_option("--sigma", gm.cfg.sigma, "weight standard deviation");
  gen_model->add_option("--seed", gm.cfg.seed, "weight seed")
      ->envname("QGRAPH_SEED");

  GenCorpusArgs gc;
  CLI::App* gen_corpus = app.add_subcommand(
      "gen-corpus", "Generate a synthetic sentence corpus (JSONL)");
  gen_corpus->add_option("--out", gc.out, "output corpus JSONL")->required();
  gen_corpus->add_option("--count", gc.cfg.count, "sentences to generate");
  gen_corpus->add_option("--vocab", gc.cfg.vocab, "token vocabulary");
  gen_corpus->add_option("--min-len", gc.cfg.min_len, "shortest sentence");
  gen_corpus->add_option("--p", gc.cfg.geometric_p,
                         "geometric length parameter in (0,1)");
  gen_corpus->add_option("--seed", gc.cfg.seed, "corpus seed")
      ->envname("QGRAPH_SEED");

  CalibrateArgs ca;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "Collect histograms and search saturation thresholds");
  calibrate->add_option("--graph", ca.graph, "FP32 graph JSON")->required();
  calibrate->add_option("--corpus", ca.corpus, "corpus JSONL")->required();
  calibrate->add_option("--out", ca.out, "output calibration table JSON")
      ->required();
  calibrate->add_option("--samples", ca.samples,
                        "calibration sentences drawn from the corpus");
  calibrate->add_option("--mode", ca.mode, "symmetric|independent|conjugate");
  calibrate->add_option("--seed", ca.seed, "sampling seed")
      ->envname("QGRAPH_SEED");

  QuantizeArgs qa;
  CLI::App* quantize = app.add_subcommand(
      "quantize", "Rewrite a graph with the named quantization passes");
  quantize->add_option("--graph", qa.graph, "input graph JSON")->required();
  quantize->add_option("--out", qa.out, "output graph JSON")->required();
  quantize->add_option("--passes", qa.passes, "naive|calibrated|gathernd")
      ->required()
      ->delimiter(',');
  quantize->add_option("--table", qa.table, "calibration table JSON");
  quantize->add_option("--emit-pass-report", qa.report,
                       "write pass reports to this file");

  RunArgs ra;
  CLI::App* run = app.add_subcommand(
      "run", "Run a graph over a corpus through the batching pipeline");
  run->add_option("--graph", ra.graph, "graph JSON")->required();
  run->add_option("--corpus", ra.corpus, "corpus JSONL")->required();
  run->add_option("--out", ra.out, "results JSONL")->required();
  run->add_option("--sort", ra.sort, "tokens|words|none");
  run->add_option("--batch", ra.batch, "batch size");
  run->add_option("--workers", ra.workers, "worker threads (1 = serial)");
  run->add_option("--repeat", ra.repeat, "repeat the run for timing");
  run->add_option("--report", ra.report,
                  "write the throughput report here instead of stdout");

  CompareArgs cm;
  CLI::App* compare = app.add_subcommand(
      "compare", "Gate a rewritten graph against its FP32 reference");
  compare->add_option("--fp32", cm.fp32, "reference graph JSON")->required();
  compare->add_option("--int8", cm.int8, "rewritten graph JSON")->required();
  compare->add_option("--corpus", cm.corpus, "corpus JSONL")->required();
  compare->add_option("--tol", cm.tol, "relative L2 tolerance");
  compare->add_option("--samples", cm.samples,
                      "evaluation sentences (0 = all)");
  compare->add_option("--seed", cm.seed, "sampling seed")
      ->envname("QGRAPH_SEED");
  compare->add_option("--report", cm.report, "write the JSON report here");

  try {
    app.parse(argc, argv);
    if (gen_model->parsed()) return cmd_gen_model(gm);
    if (gen_corpus->parsed()) return cmd_gen_corpus(gc);
    if (calibrate->parsed()) return cmd_calibrate(ca);
    if (quantize->parsed()) return cmd_quantize(qa);
    if (run->parsed()) return cmd_run(ra);
    if (compare->parsed()) return cmd_compare(cm);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const qgraph::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
