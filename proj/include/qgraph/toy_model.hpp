// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "qgraph/graph.hpp"
#include "qgraph/rng.hpp"

namespace qgraph {

// Weight initialization styles for the generated model.
//   Gaussian:   every weight drawn from N(0, sigma^2).
//   LongTailed: Gaussian base plus a small number of +-10 sigma outliers
//               per weight matrix, which stretches naive min/max ranges.
enum class WeightPreset {
  Gaussian,
  LongTailed,
};

struct ToyConfig {
  int64_t d_model = 16;     // embedding width
  int64_t heads = 2;        // attention heads per layer; must divide d_model
  int64_t layers = 2;       // encoder layers
  int64_t seq_len = 8;      // maximum encoder sequence length
  int64_t vocab = 16;       // token vocabulary (embedding rows)
  int64_t decode_steps = 4; // loop iterations in the decoder region
  int64_t beam = 4;         // decoder beam width
  double sigma = 0.02;      // weight standard deviation
  WeightPreset preset = WeightPreset::Gaussian;
  uint64_t seed = 0;
};

// Builds the full encoder + looped-decoder graph. The graph has one
// placeholder, "tokens", of shape (seq_len, 1) and dtype S32, and a single
// F32 output of shape (beam, decode_steps, vocab).
Graph build_toy_transformer(const ToyConfig& cfg);

// Draws token ids uniformly from [0, vocab) as a (seq_len, 1) S32 tensor.
Tensor random_tokens(const ToyConfig& cfg, Rng& rng);

}  // namespace qgraph
