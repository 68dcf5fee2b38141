// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qgraph/calibration.hpp"
#include "qgraph/executor.hpp"
#include "qgraph/graph.hpp"

namespace qgraph {

// What a rewrite pass did. Ids inside loop bodies carry a "<loop id>/"
// prefix. "replaced" lists ids that survived with a new kind; the census
// delta always satisfies after == before + added - removed + replaced deltas.
struct PassReport {
  std::string pass;
  std::vector<std::pair<std::string, OpKind>> added;
  std::vector<std::pair<std::string, OpKind>> removed;
  std::vector<std::pair<std::string, OpKind>> replaced;
  std::map<OpKind, int64_t> census_before;
  std::map<OpKind, int64_t> census_after;
  std::string to_json() const;
};

// Wraps every MatMul in runtime-range INT8 machinery: MinOp/MaxOp feed a
// QuantizeV2 per operand (left S8, right U8), the product runs as
// QuantizedMatMul, and RequantizationRange -> Requantize -> Dequantize
// restores FP32. The final Dequantize inherits the MatMul's id, so consumer
// edges and graph outputs never move.
std::pair<Graph, PassReport> naive_quantize_pass(const Graph& g);

// Like the naive pass, but saturation thresholds come from the calibration
// table as Const nodes (no MinOp/MaxOp), MatMuls with a sparse operand stay
// in FP32, and the S32 accumulator dequantizes directly except ahead of a
// loop-interior gather, which keeps a Requantize so the gather pass can move
// the Dequantize behind it.
std::pair<Graph, PassReport> calibrated_quantize_pass(
    const Graph& g, const CalibrationTable& table);

// Swaps Dequantize -> GatherNd chains inside loop bodies into
// QuantizedGatherNd -> Dequantize, so the gather copies 1-byte elements.
// Applies only where the gather is the dequantize's sole consumer; output
// values are bit-identical.
std::pair<Graph, PassReport> quantize_gathernd_pass(
    const Graph& g, const CalibrationTable& table);

struct OutputDelta {
  std::string output;
  double max_abs = 0.0;
  double rel_l2 = 0.0;
};

struct EquivalenceReport {
  std::vector<OutputDelta> outputs;  // worst deltas across feeds, per output
  double worst_rel_l2 = 0.0;
  bool pass = false;
  std::string to_json() const;
};

// Runs both graphs on every feed and compares outputs pairwise.
// pass iff every output's relative L2 delta stays within tol.
EquivalenceReport verify_equivalence(const Graph& a, const Graph& b,
                                     const std::vector<Feeds>& feeds,
                                     double tol);

}  // namespace qgraph
