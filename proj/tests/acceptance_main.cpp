// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
//
// Release acceptance suite. Each numbered check prints one [PASS]/[FAIL]
// line; the process exits nonzero if any check fails. Checks are
// independent: a thrown error fails its own criterion and the rest still
// run. The CLI check needs QGRAPH_CLI pointing at the binary (the ctest
// wiring sets it).

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qgraph/calibration.hpp"
#include "qgraph/executor.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/kernels.hpp"
#include "qgraph/pipeline.hpp"
#include "qgraph/quant.hpp"
#include "qgraph/rewriter.hpp"
#include "qgraph/rng.hpp"
#include "qgraph/tensor.hpp"
#include "qgraph/toy_model.hpp"
#include "qgraph/trace.hpp"

namespace fs = std::filesystem;
using namespace qgraph;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

Outcome pass(std::string detail) { return {true, std::move(detail)}; }
Outcome failed(std::string detail) { return {false, std::move(detail)}; }

// ---------------------------------------------------------------- helpers

Node make(std::string id, OpKind kind, std::vector<EdgeRef> inputs = {}) {
  Node n;
  n.id = std::move(id);
  n.kind = kind;
  n.inputs = std::move(inputs);
  return n;
}

Node constant(std::string id, Tensor t) {
  Node n = make(std::move(id), OpKind::Const);
  n.attrs["value"] = std::move(t);
  return n;
}

int64_t count(const std::map<OpKind, int64_t>& census, OpKind k) {
  auto it = census.find(k);
  return it == census.end() ? 0 : it->second;
}

Tensor random_matrix(Rng& rng, int64_t r, int64_t c) {
  std::vector<float> v(static_cast<size_t>(r * c));
  for (float& f : v) f = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Tensor::f32({r, c}, std::move(v));
}

Graph one_matmul_graph(uint64_t seed) {
  Rng rng(seed);
  Graph g("mm");
  g.add(constant("a", random_matrix(rng, 8, 8)));
  g.add(constant("b", random_matrix(rng, 8, 8)));
  g.add(make("m", OpKind::MatMul, {{"a", 0}, {"b", 0}}));
  g.add(make("s", OpKind::Softmax, {{"m", 0}}));
  g.set_outputs({{"s", 0}});
  return g;
}

std::vector<Feeds> toy_feeds(const ToyConfig& cfg, uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<Feeds> feeds;
  for (int i = 0; i < n; ++i)
    feeds.push_back(Feeds{{"tokens", random_tokens(cfg, rng)}});
  return feeds;
}

Histogram hist_of(const std::vector<double>& xs) {
  double mn = xs[0], mx = xs[0];
  for (double x : xs) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  Histogram h(mn, mx);
  for (double x : xs) h.add(x);
  return h;
}

double abs_bin_width(const Histogram& h) {
  return std::max(std::abs(h.lo()), std::abs(h.hi())) / Histogram::kBins;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.dtype() == b.dtype() && a.shape() == b.shape() &&
         a.byte_size() == b.byte_size() &&
         std::memcmp(a.raw_data(), b.raw_data(), a.byte_size()) == 0;
}

bool results_bit_equal(const RunResult& a, const RunResult& b) {
  if (a.outputs.size() != b.outputs.size()) return false;
  for (const auto& [id, outs] : a.outputs) {
    auto it = b.outputs.find(id);
    if (it == b.outputs.end() || it->second.size() != outs.size()) return false;
    for (const auto& [key, t] : outs) {
      auto jt = it->second.find(key);
      if (jt == it->second.end() || !bit_equal(t, jt->second)) return false;
    }
  }
  return true;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- checks

// 1. The offset-expansion GEMM is bit-identical to the direct triple loop.
Outcome check_gemm_oracle() {
  Rng rng(1001);
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    int64_t m = rng.uniform_int(1, 8);
    int64_t k = rng.uniform_int(1, 8);
    int64_t n = rng.uniform_int(1, 8);
    std::vector<int8_t> av(static_cast<size_t>(m * k));
    std::vector<uint8_t> bv(static_cast<size_t>(k * n));
    std::vector<int32_t> cv(static_cast<size_t>(m * n));
    for (auto& v : av) v = static_cast<int8_t>(rng.uniform_int(-128, 127));
    for (auto& v : bv) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
    for (auto& v : cv) v = static_cast<int32_t>(rng.uniform_int(-1000, 1000));
    Tensor a = Tensor::s8({m, k}, av);
    Tensor b = Tensor::u8({k, n}, bv);
    Tensor c0 = Tensor::s32({m, n}, cv);
    GemmOffsets off;
    off.alpha = static_cast<int32_t>(rng.uniform_int(-3, 3));
    off.beta = static_cast<int32_t>(rng.uniform_int(-2, 2));
    off.oa = static_cast<int32_t>(rng.uniform_int(-128, 127));
    off.ob = static_cast<int32_t>(rng.uniform_int(-128, 127));
    off.oc = static_cast<int32_t>(rng.uniform_int(-500, 500));

    Tensor got = gemm_s8u8s32(a, b, off, &c0);
    Tensor want = Tensor::zeros(DType::S32, {m, n});
    auto dst = want.s32_mut();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        int32_t acc = 0;
        for (int64_t t = 0; t < k; ++t) {
          int32_t lhs = static_cast<int32_t>(a.s8()[i * k + t]) + off.oa;
          int32_t rhs = static_cast<int32_t>(b.u8()[t * n + j]) + off.ob;
          acc += lhs * rhs;
        }
        dst[i * n + j] = off.alpha * acc + off.beta * c0.s32()[i * n + j] + off.oc;
      }
    if (!bit_equal(got, want))
      return failed("mismatch at instance " + std::to_string(trial));
  }
  return pass(std::to_string(trials) + " instances bit-identical");
}

// 2. Quantize/dequantize round-trip error stays within half a step.
Outcome check_round_trip() {
  Rng rng(1002);
  const int n = 100000;
  QuantParams u8 = compute_scale(-0.7, 1.3, DType::U8);
  QuantParams s8 = compute_scale(-1.0, 1.0, DType::S8);
  double worst_u8 = 0.0, worst_s8 = 0.0;
  for (int i = 0; i < n; ++i) {
    double xu = rng.uniform(-0.7, 1.3);
    double du = dequantize_value(static_cast<double>(quantize_value(xu, u8)), u8);
    worst_u8 = std::max(worst_u8, std::abs(du - xu));
    double xs = rng.uniform(-1.0, 1.0);
    double ds = dequantize_value(static_cast<double>(quantize_value(xs, s8)), s8);
    worst_s8 = std::max(worst_s8, std::abs(ds - xs));
  }
  if (worst_u8 > 0.5 / u8.scale)
    return failed("U8 worst " + fmt(worst_u8) + " > " + fmt(0.5 / u8.scale));
  if (worst_s8 > 0.5 / s8.scale)
    return failed("S8 worst " + fmt(worst_s8) + " > " + fmt(0.5 / s8.scale));
  return pass("worst U8 " + fmt(worst_u8) + ", S8 " + fmt(worst_s8) +
              " within half a step over " + std::to_string(n) +
              " scalars each");
}

// 3. The entropy sweep clips contaminated tails but keeps uniform data.
Outcome check_kl_behavior() {
  Rng rng(43);
  std::vector<double> xs;
  xs.reserve(100000);
  for (int i = 0; i < 99900; ++i) xs.push_back(rng.gaussian(0.0, 1.0));
  for (int i = 0; i < 100; ++i) xs.push_back(i % 2 == 0 ? 50.0 : -50.0);
  ThresholdPair contaminated = search_threshold(hist_of(xs), CalibMode::Symmetric);
  if (!(contaminated.t_max < 10.0))
    return failed("contaminated threshold " + fmt(contaminated.t_max) +
                  " not below 10");
  if (!(contaminated.t_max > 1.0))
    return failed("contaminated threshold " + fmt(contaminated.t_max) +
                  " clipped into the body");

  Rng rng2(42);
  std::vector<double> us(100000);
  for (double& x : us) x = rng2.uniform(-1.0, 1.0);
  Histogram uh = hist_of(us);
  ThresholdPair uniform = search_threshold(uh, CalibMode::Symmetric);
  if (std::abs(uniform.t_max - 1.0) > abs_bin_width(uh))
    return failed("uniform threshold " + fmt(uniform.t_max) +
                  " more than a bin away from 1.0");
  return pass("contaminated clipped to " + fmt(contaminated.t_max) +
              ", uniform kept at " + fmt(uniform.t_max));
}

// 4. Mode algebra: Symmetric/Conjugate mirror exactly; Conjugate equals the
// larger Independent magnitude.
Outcome check_mode_contracts() {
  Rng rng(1004);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs;
    xs.reserve(15000);
    double neg_scale = rng.uniform(0.5, 2.0);
    double pos_scale = rng.uniform(0.5, 2.0);
    for (int i = 0; i < 15000; ++i) {
      double x = rng.gaussian(0.0, 1.0);
      xs.push_back(x < 0 ? x * neg_scale : x * pos_scale);
    }
    Histogram h = hist_of(xs);
    ThresholdPair sym = search_threshold(h, CalibMode::Symmetric);
    ThresholdPair ind = search_threshold(h, CalibMode::Independent);
    ThresholdPair con = search_threshold(h, CalibMode::Conjugate);
    if (sym.t_min != -sym.t_max)
      return failed("Symmetric pair not mirrored at trial " +
                    std::to_string(trial));
    if (con.t_min != -con.t_max)
      return failed("Conjugate pair not mirrored at trial " +
                    std::to_string(trial));
    double expect = std::max(std::abs(ind.t_min), std::abs(ind.t_max));
    if (con.t_max != expect)
      return failed("Conjugate " + fmt(con.t_max) + " != max |Independent| " +
                    fmt(expect) + " at trial " + std::to_string(trial));
  }
  return pass("100 histograms satisfy both identities exactly");
}

// 5. Accuracy surrogate: calibrated INT8 tracks FP32 on Gaussian weights,
// and beats the naive rewrite on long-tailed weights.
Outcome check_accuracy_surrogate() {
  ToyConfig cfg;
  cfg.seed = 66;
  Graph g = build_toy_transformer(cfg);
  CalibrationTable table =
      calibrate(g, toy_feeds(cfg, 67, 60), default_taps(g), CalibMode::Conjugate);
  auto [cal, r1] = calibrated_quantize_pass(g, table);
  auto [out, r2] = quantize_gathernd_pass(cal, table);
  (void)r1;
  (void)r2;
  EquivalenceReport eq = verify_equivalence(g, out, toy_feeds(cfg, 68, 4), 5e-2);
  if (!eq.pass)
    return failed("Gaussian calibrated rel-L2 " + fmt(eq.worst_rel_l2) +
                  " exceeds 5e-2");

  ToyConfig lt;
  lt.seed = 69;
  lt.preset = WeightPreset::LongTailed;
  Graph glt = build_toy_transformer(lt);
  CalibrationTable tlt = calibrate(glt, toy_feeds(lt, 70, 60), default_taps(glt),
                                   CalibMode::Independent);
  auto [naive, rn] = naive_quantize_pass(glt);
  auto [calq, rc] = calibrated_quantize_pass(glt, tlt);
  auto [calg, rg] = quantize_gathernd_pass(calq, tlt);
  (void)rn;
  (void)rc;
  (void)rg;
  std::vector<Feeds> eval = toy_feeds(lt, 71, 8);
  EquivalenceReport en = verify_equivalence(glt, naive, eval, 1.0);
  EquivalenceReport ec = verify_equivalence(glt, calg, eval, 1.0);
  if (!(en.worst_rel_l2 > ec.worst_rel_l2))
    return failed("long-tailed naive " + fmt(en.worst_rel_l2) +
                  " not worse than calibrated " + fmt(ec.worst_rel_l2));
  return pass("Gaussian rel-L2 " + fmt(eq.worst_rel_l2) +
              " <= 5e-2; long-tailed naive " + fmt(en.worst_rel_l2) +
              " > calibrated " + fmt(ec.worst_rel_l2));
}

// 6. Rewrite census on a single-MatMul graph, plus idempotence of all passes.
Outcome check_rewrite_census() {
  Graph g = one_matmul_graph(50);
  auto [naive, report] = naive_quantize_pass(g);
  auto before = op_census(g);
  auto after = op_census(naive);
  const std::vector<std::pair<OpKind, int64_t>> delta = {
      {OpKind::QuantizeV2, 2},         {OpKind::MinOp, 2},
      {OpKind::MaxOp, 2},              {OpKind::RequantizationRange, 1},
      {OpKind::Requantize, 1},         {OpKind::Dequantize, 1}};
  for (const auto& [kind, n] : delta)
    if (count(after, kind) - count(before, kind) != n)
      return failed("naive census delta wrong for " + std::string(op_name(kind)));
  if (count(after, OpKind::QuantizedMatMul) != 1 ||
      count(after, OpKind::MatMul) != 0)
    return failed("naive pass did not swap the MatMul");
  if (naive.size() != g.size() + 9)
    return failed("naive pass added " + std::to_string(naive.size() - g.size()) +
                  " nodes, expected 9");

  CalibrationTable table =
      calibrate(g, {Feeds{}}, default_taps(g), CalibMode::Conjugate);
  auto [cal, rc] = calibrated_quantize_pass(g, table);
  auto cal_census = op_census(cal);
  // Every consumer here is unquantized, so no runtime-range or requantize
  // machinery may survive.
  if (count(cal_census, OpKind::MinOp) != 0 ||
      count(cal_census, OpKind::MaxOp) != 0)
    return failed("calibrated output contains runtime range ops");
  if (count(cal_census, OpKind::Requantize) != 0 ||
      count(cal_census, OpKind::RequantizationRange) != 0)
    return failed("calibrated output requantizes ahead of FP32 consumers");

  auto [naive2, rn2] = naive_quantize_pass(naive);
  auto [cal2, rc2] = calibrated_quantize_pass(cal, table);
  auto [gat1, rg1] = quantize_gathernd_pass(cal, table);
  auto [gat2, rg2] = quantize_gathernd_pass(gat1, table);
  (void)report;
  (void)rc;
  (void)rn2;
  (void)rc2;
  (void)rg1;
  (void)rg2;
  if (save_graph(naive2) != save_graph(naive))
    return failed("naive pass is not idempotent");
  if (save_graph(cal2) != save_graph(cal))
    return failed("calibrated pass is not idempotent");
  if (save_graph(gat2) != save_graph(gat1))
    return failed("gathernd pass is not idempotent");
  return pass("naive delta exact, calibrated output clean, passes idempotent");
}

// 7. The gather rewrite is bit-exact and moves exactly 4x fewer bytes.
Outcome check_gather_payload() {
  ToyConfig cfg;
  cfg.seed = 62;
  Graph g = build_toy_transformer(cfg);
  CalibrationTable table =
      calibrate(g, toy_feeds(cfg, 63, 16), default_taps(g), CalibMode::Conjugate);
  auto [cal, r1] = calibrated_quantize_pass(g, table);
  auto [out, r2] = quantize_gathernd_pass(cal, table);
  (void)r1;
  (void)r2;

  EquivalenceReport eq = verify_equivalence(cal, out, toy_feeds(cfg, 64, 3), 0.0);
  if (!eq.pass || eq.worst_rel_l2 != 0.0)
    return failed("gather rewrite changed outputs (rel-L2 " +
                  fmt(eq.worst_rel_l2) + ")");

  Feeds feed = toy_feeds(cfg, 65, 1)[0];
  Trace tc, tq;
  ExecOptions oc, oq;
  oc.trace = &tc;
  oq.trace = &tq;
  execute(cal, feed, oc);
  execute(out, feed, oq);
  auto bytes_c = gather_bytes_by_node(tc);
  auto bytes_q = gather_bytes_by_node(tq);
  const std::string node = "decode/dec.gather";
  if (!bytes_c.count(node) || !bytes_q.count(node))
    return failed("trace lacks payload for " + node);
  double ratio = static_cast<double>(bytes_c.at(node)) /
                 static_cast<double>(bytes_q.at(node));
  if (ratio != 4.0) return failed("payload ratio " + fmt(ratio) + " != 4.0");
  return pass("bit-exact rewrite, payload ratio exactly 4.0 on " + node);
}

// 8. Token-sorted batching never pads more than word-sorted or unsorted.
Outcome check_sorting_property() {
  int strict = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    CorpusConfig cc;
    cc.count = 512;
    cc.seed = seed;
    auto corpus = generate_corpus(cc);
    auto padded = [&](SortKey k) {
      auto s = corpus;
      sort_sentences(s, k);
      return padding_stats(make_batches(s, 8)).padded_tokens;
    };
    int64_t tokens = padded(SortKey::Tokens);
    int64_t words = padded(SortKey::Words);
    int64_t none = padded(SortKey::None);
    if (tokens > words || words > none)
      return failed("ordering violated at seed " + std::to_string(seed));
    if (tokens < words && words < none) ++strict;
  }
  if (strict < 90)
    return failed("strict ordering on only " + std::to_string(strict) +
                  "/100 corpora");
  return pass("token <= word <= unsorted on 100/100, strict on " +
              std::to_string(strict) + "/100");
}

// 9. Parallel runs merge bit-identically to the serial run.
Outcome check_parallel_determinism() {
  ToyConfig cfg;
  cfg.seed = 3;
  Graph g = build_toy_transformer(cfg);
  CorpusConfig cc;
  cc.count = 256;
  cc.seed = 12;
  auto corpus = generate_corpus(cc);
  sort_sentences(corpus, SortKey::Tokens);
  auto batches = make_batches(corpus, 8);
  if (batches.size() != 32)
    return failed("expected 32 batches, built " +
                  std::to_string(batches.size()));
  RunResult serial = run_serial(g, batches);
  for (int workers : {1, 2, 4, 8}) {
    RunResult par = run_parallel(g, batches, workers);
    if (!results_bit_equal(serial, par) ||
        par.stats.output_hash != serial.stats.output_hash)
      return failed("W=" + std::to_string(workers) + " diverged from serial");
  }
  return pass("W in {1,2,4,8} bit-identical to serial on 32 batches, hash " +
              hash_hex(serial.stats.output_hash));
}

// 10. The shipped binary chains calibrate -> quantize -> run -> compare.
Outcome check_cli_end_to_end() {
  const char* bin = std::getenv("QGRAPH_CLI");
  if (!bin) return failed("QGRAPH_CLI not set; build with the CLI enabled");

  fs::path dir = fs::temp_directory_path() /
                 ("qgraph_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto file = [&](const char* name) { return (dir / name).string(); };
  auto cli = [&](const std::string& args) {
    std::string cmd =
        std::string("\"") + bin + "\" " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return rc == -1 || !WIFEXITED(rc) ? -1 : WEXITSTATUS(rc);
  };

  struct Step {
    const char* what;
    std::string args;
  };
  const Step steps[] = {
      {"gen-model", "gen-model --out " + file("model.json") + " --seed 1"},
      {"gen-corpus",
       "gen-corpus --out " + file("corpus.jsonl") + " --count 80 --seed 2"},
      {"calibrate", "calibrate --graph " + file("model.json") + " --corpus " +
                        file("corpus.jsonl") + " --samples 60 --seed 3 --out " +
                        file("table.json")},
      {"quantize", "quantize --graph " + file("model.json") + " --table " +
                       file("table.json") +
                       " --passes calibrated,gathernd --out " +
                       file("int8.json")},
      {"run", "run --graph " + file("int8.json") + " --corpus " +
                  file("corpus.jsonl") + " --out " + file("results.jsonl") +
                  " --workers 2 --report " + file("report.json")},
      {"compare", "compare --fp32 " + file("model.json") + " --int8 " +
                      file("int8.json") + " --corpus " + file("corpus.jsonl") +
                      " --samples 8 --seed 4 --tol 5e-2"},
  };
  for (const Step& s : steps) {
    int rc = cli(s.args);
    if (rc != 0) {
      fs::remove_all(dir);
      return failed(std::string(s.what) + " exited " + std::to_string(rc));
    }
  }
  fs::remove_all(dir);
  return pass("calibrate/quantize/run/compare all exited 0 at tol 5e-2");
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> checks = {
      {"offset GEMM matches the triple-loop oracle", check_gemm_oracle},
      {"quantization round-trip bounded by half a step", check_round_trip},
      {"entropy sweep clips tails, keeps uniform range", check_kl_behavior},
      {"threshold mode identities hold exactly", check_mode_contracts},
      {"calibrated INT8 accuracy surrogate", check_accuracy_surrogate},
      {"rewrite census and pass idempotence", check_rewrite_census},
      {"gather rewrite payload ratio", check_gather_payload},
      {"sorted batching padding order", check_sorting_property},
      {"parallel execution determinism", check_parallel_determinism},
      {"command-line end-to-end pipeline", check_cli_end_to_end},
  };

  int failures = 0;
  for (size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].fn();
    } catch (const std::exception& e) {
      o = failed(std::string("threw: ") + e.what());
    }
    if (!o.ok) ++failures;
    std::printf("[%s] %2zu. %s%s%s%s\n", o.ok ? "PASS" : "FAIL", i + 1,
                checks[i].name, o.detail.empty() ? "" : " (",
                o.detail.c_str(), o.detail.empty() ? "" : ")");
    std::fflush(stdout);
  }
  if (failures) {
    std::printf("%d of %zu acceptance checks failed\n", failures, checks.size());
    return 1;
  }
  std::printf("all %zu acceptance checks passed\n", checks.size());
  return 0;
}
