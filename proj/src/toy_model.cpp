// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0

#include "qgraph/toy_model.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qgraph/error.hpp"

namespace qgraph {
namespace {

// Weight draws happen in construction order so a given seed always yields
// the same model: embed.w, then per layer (per head wq, wk, wv, then wo),
// then dec.w1, dec.wv, then the beam reorder schedule. gamma/beta are
// deterministic constants and consume no randomness.
// The long-tailed preset plants its outliers only in MatMul weight matrices:
// those are the tensors whose quantized ranges the preset is meant to stress.
// The embedding table stays Gaussian so gathered rows keep a clean range.
Tensor draw_weights(Rng& rng, Shape shape, const ToyConfig& cfg,
                    bool tailed = true) {
  int64_t n = shape_numel(shape);
  std::vector<float> v(static_cast<size_t>(n));
  for (float& x : v) x = static_cast<float>(rng.gaussian(0.0, cfg.sigma));
  if (tailed && cfg.preset == WeightPreset::LongTailed) {
    size_t n_out = static_cast<size_t>(
        std::max<int64_t>(1, std::llround(0.001 * static_cast<double>(n))));
    for (size_t p : rng.sample_without_replacement(static_cast<size_t>(n), n_out)) {
      double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      v[p] = static_cast<float>(sign * 10.0 * cfg.sigma);
    }
  }
  return Tensor::f32(std::move(shape), std::move(v));
}

Node value_const(std::string id, Tensor t) {
  Node n;
  n.id = std::move(id);
  n.kind = OpKind::Const;
  n.attrs["value"] = std::move(t);
  return n;
}

Node op(std::string id, OpKind kind, std::vector<EdgeRef> inputs) {
  Node n;
  n.id = std::move(id);
  n.kind = kind;
  n.inputs = std::move(inputs);
  return n;
}

Tensor splat(float v, int64_t n) {
  return Tensor::f32({n}, std::vector<float>(static_cast<size_t>(n), v));
}

Graph build_decoder_body(const ToyConfig& cfg, Rng& rng) {
  Graph b("decoder_body");

  Node state;
  state.id = "state";
  state.kind = OpKind::Const;
  state.attrs["dtype"] = std::string("F32");
  b.add(std::move(state));

  Node beam_idx;
  beam_idx.id = "beam_idx";
  beam_idx.kind = OpKind::Const;
  beam_idx.attrs["dtype"] = std::string("S32");
  b.add(std::move(beam_idx));

  b.add(value_const("dec.w1", draw_weights(rng, {cfg.d_model, cfg.d_model}, cfg)));
  b.add(op("dec.h", OpKind::MatMul, {{"state", 0}, {"dec.w1", 0}}));
  // Beam reorder: each step keeps rows of the fresh hidden state selected by
  // the per-step index slice, mimicking beam-search survivor shuffling.
  b.add(op("dec.gather", OpKind::GatherNd, {{"dec.h", 0}, {"beam_idx", 0}}));
  b.add(op("dec.res", OpKind::Add, {{"state", 0}, {"dec.gather", 0}}));
  b.add(value_const("dec.gamma", splat(1.0f, cfg.d_model)));
  b.add(value_const("dec.beta", splat(0.0f, cfg.d_model)));
  b.add(op("dec.ln", OpKind::LayerNorm,
           {{"dec.res", 0}, {"dec.gamma", 0}, {"dec.beta", 0}}));
  b.add(value_const("dec.wv", draw_weights(rng, {cfg.d_model, cfg.vocab}, cfg)));
  b.add(op("dec.logits", OpKind::MatMul, {{"dec.ln", 0}, {"dec.wv", 0}}));
  b.add(op("dec.probs", OpKind::Softmax, {{"dec.logits", 0}}));

  // Output 0 is the carried state; output 1 is emitted every step and the
  // loop stacks the emissions along a new leading axis.
  b.set_outputs({{"dec.ln", 0}, {"dec.probs", 0}});
  return b;
}

}  // namespace

Graph build_toy_transformer(const ToyConfig& cfg) {
  if (cfg.d_model <= 0 || cfg.heads <= 0 || cfg.layers <= 0 || cfg.seq_len <= 0 ||
      cfg.vocab <= 0 || cfg.decode_steps <= 0 || cfg.beam <= 0)
    fail(Errc::InvalidArgument, "toy model dimensions must be positive");
  if (cfg.d_model % cfg.heads != 0)
    fail(Errc::InvalidArgument, "heads must divide d_model");
  if (cfg.beam > cfg.seq_len)
    fail(Errc::InvalidArgument,
         "beam exceeds seq_len; the decoder seeds one beam per encoder row");

  Rng rng(cfg.seed);
  const int64_t dk = cfg.d_model / cfg.heads;
  Graph g("toy_transformer");

  Node tokens;
  tokens.id = "tokens";
  tokens.kind = OpKind::Const;
  tokens.attrs["dtype"] = std::string("S32");
  g.add(std::move(tokens));

  g.add(value_const("embed.w",
                    draw_weights(rng, {cfg.vocab, cfg.d_model}, cfg, false)));
  g.add(op("embed", OpKind::GatherNd, {{"embed.w", 0}, {"tokens", 0}}));

  EdgeRef x{"embed", 0};
  for (int64_t l = 0; l < cfg.layers; ++l) {
    std::string lp = "enc" + std::to_string(l) + ".";
    std::vector<EdgeRef> ctxs;
    for (int64_t hh = 0; hh < cfg.heads; ++hh) {
      std::string hp = lp + "h" + std::to_string(hh) + ".";
      g.add(value_const(hp + "wq", draw_weights(rng, {cfg.d_model, dk}, cfg)));
      g.add(value_const(hp + "wk", draw_weights(rng, {cfg.d_model, dk}, cfg)));
      g.add(value_const(hp + "wv", draw_weights(rng, {cfg.d_model, dk}, cfg)));
      g.add(op(hp + "q", OpKind::MatMul, {x, {hp + "wq", 0}}));
      g.add(op(hp + "k", OpKind::MatMul, {x, {hp + "wk", 0}}));
      g.add(op(hp + "v", OpKind::MatMul, {x, {hp + "wv", 0}}));
      Node score = op(hp + "score", OpKind::MatMul, {{hp + "q", 0}, {hp + "k", 0}});
      score.attrs["transpose_b"] = true;
      g.add(std::move(score));
      Node scaled = op(hp + "scaled", OpKind::Scale, {{hp + "score", 0}});
      scaled.attrs["factor"] = 1.0 / std::sqrt(static_cast<double>(dk));
      g.add(std::move(scaled));
      g.add(op(hp + "probs", OpKind::Softmax, {{hp + "scaled", 0}}));
      g.add(op(hp + "ctx", OpKind::MatMul, {{hp + "probs", 0}, {hp + "v", 0}}));
      ctxs.push_back({hp + "ctx", 0});
    }
    Node cat = op(lp + "concat", OpKind::Concat, std::move(ctxs));
    cat.attrs["axis"] = int64_t{1};
    g.add(std::move(cat));
    g.add(value_const(lp + "wo", draw_weights(rng, {cfg.d_model, cfg.d_model}, cfg)));
    g.add(op(lp + "proj", OpKind::MatMul, {{lp + "concat", 0}, {lp + "wo", 0}}));
    g.add(op(lp + "res", OpKind::Add, {x, {lp + "proj", 0}}));
    g.add(value_const(lp + "gamma", splat(1.0f, cfg.d_model)));
    g.add(value_const(lp + "beta", splat(0.0f, cfg.d_model)));
    g.add(op(lp + "ln", OpKind::LayerNorm,
             {{lp + "res", 0}, {lp + "gamma", 0}, {lp + "beta", 0}}));
    x = {lp + "ln", 0};
  }

  // Seed one decoder beam per leading encoder row.
  {
    std::vector<int32_t> rows(static_cast<size_t>(cfg.beam));
    for (int64_t i = 0; i < cfg.beam; ++i) rows[static_cast<size_t>(i)] = static_cast<int32_t>(i);
    g.add(value_const("beam_init.idx", Tensor::s32({cfg.beam, 1}, std::move(rows))));
  }
  g.add(op("beam_init", OpKind::GatherNd, {x, {"beam_init.idx", 0}}));

  Graph body = build_decoder_body(cfg, rng);

  // Random but seed-determined survivor schedule, one (beam, 1) slice per step.
  std::vector<int32_t> sched(static_cast<size_t>(cfg.decode_steps * cfg.beam));
  for (int32_t& s : sched)
    s = static_cast<int32_t>(rng.uniform_int(0, cfg.beam - 1));

  Node loop = op("decode", OpKind::LoopRegion, {{"beam_init", 0}});
  loop.attrs["steps"] = cfg.decode_steps;
  loop.attrs["carried"] = std::vector<std::string>{"state"};
  loop.attrs["body"] = std::make_shared<const Graph>(std::move(body));
  loop.attrs[std::string(kPerStepPrefix) + "beam_idx"] =
      Tensor::s32({cfg.decode_steps, cfg.beam, 1}, std::move(sched));
  g.add(std::move(loop));

  // The loop stacks emissions as (steps, beam, vocab); reorder to
  // (beam, steps, vocab) with a full transpose gather.
  {
    std::vector<int32_t> idx(static_cast<size_t>(cfg.beam * cfg.decode_steps * 2));
    size_t w = 0;
    for (int64_t bm = 0; bm < cfg.beam; ++bm)
      for (int64_t st = 0; st < cfg.decode_steps; ++st) {
        idx[w++] = static_cast<int32_t>(st);
        idx[w++] = static_cast<int32_t>(bm);
      }
    g.add(value_const("transpose.idx",
                      Tensor::s32({cfg.beam, cfg.decode_steps, 2}, std::move(idx))));
  }
  g.add(op("output", OpKind::GatherNd, {{"decode", 1}, {"transpose.idx", 0}}));

  g.set_outputs({{"output", 0}});
  validate_or_throw(g);
  return g;
}

Tensor random_tokens(const ToyConfig& cfg, Rng& rng) {
  std::vector<int32_t> toks(static_cast<size_t>(cfg.seq_len));
  for (int32_t& t : toks)
    t = static_cast<int32_t>(rng.uniform_int(0, cfg.vocab - 1));
  return Tensor::s32({cfg.seq_len, 1}, std::move(toks));
}

}  // namespace qgraph
