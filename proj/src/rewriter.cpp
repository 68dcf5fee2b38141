// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/rewriter.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace qgraph {

using nlohmann::json;

namespace {

json pairs_to_json(const std::vector<std::pair<std::string, OpKind>>& v) {
  json a = json::array();
  for (const auto& [id, k] : v) a.push_back({{"id", id}, {"kind", op_name(k)}});
  return a;
}

json census_to_json(const std::map<OpKind, int64_t>& c) {
  json o = json::object();
  for (const auto& [k, n] : c) o[op_name(k)] = n;
  return o;
}

Node make_node(std::string id, OpKind kind, std::vector<EdgeRef> inputs) {
  Node n;
  n.id = std::move(id);
  n.kind = kind;
  n.inputs = std::move(inputs);
  return n;
}

Node const_scalar(std::string id, double v) {
  Node n = make_node(std::move(id), OpKind::Const, {});
  n.attrs.emplace("value", Tensor::scalar(static_cast<float>(v)));
  return n;
}

// Shared bookkeeping for a pass walking nested graphs.
struct Ctx {
  PassReport* report;
  const CalibrationTable* table = nullptr;
  std::string prefix;  // "<loop id>/" per nesting level

  void log_added(const Node& n) {
    report->added.emplace_back(prefix + n.id, n.kind);
  }
  void log_replaced(const std::string& id, OpKind k) {
    report->replaced.emplace_back(prefix + id, k);
  }
};

// The quantized core shared by both quantization passes: two QuantizeV2
// nodes (left operand signed, right unsigned) feeding a QuantizedMatMul that
// keeps the original transpose flag. Range inputs are supplied by the caller.
// Returns the QuantizedMatMul id.
std::string add_quantized_core(Graph& out, Ctx& c, const Node& m,
                               EdgeRef a_range_min, EdgeRef a_range_max,
                               EdgeRef b_range_min, EdgeRef b_range_max) {
  std::string qa = out.fresh_id(m.id + ".qa");
  {
    Node n = make_node(qa, OpKind::QuantizeV2,
                       {m.inputs[0], a_range_min, a_range_max});
    n.attrs.emplace("target", std::string(dtype_name(DType::S8)));
    c.log_added(out.add(std::move(n)));
  }
  std::string qb = out.fresh_id(m.id + ".qb");
  {
    Node n = make_node(qb, OpKind::QuantizeV2,
                       {m.inputs[1], b_range_min, b_range_max});
    n.attrs.emplace("target", std::string(dtype_name(DType::U8)));
    c.log_added(out.add(std::move(n)));
  }
  std::string qmm = out.fresh_id(m.id + ".qmm");
  {
    Node n = make_node(qmm, OpKind::QuantizedMatMul,
                       {{qa, 0}, {qb, 0}, {qa, 1}, {qa, 2}, {qb, 1}, {qb, 2}});
    if (m.attr_bool("transpose_b", false)) n.attrs.emplace("transpose_b", true);
    c.log_added(out.add(std::move(n)));
  }
  return qmm;
}

// Replaces node `id` (already removed from the graph) with a Dequantize of
// the same id, keeping every consumer edge and output reference valid.
void add_dequantize_at(Graph& out, Ctx& c, const std::string& id,
                       std::vector<EdgeRef> inputs) {
  out.add(make_node(id, OpKind::Dequantize, std::move(inputs)));
  c.log_replaced(id, OpKind::Dequantize);
}

Graph naive_level(const Graph& g, Ctx& c) {
  Graph out = g;
  for (auto& [id, n] : out.nodes_mut()) {
    if (n.kind != OpKind::LoopRegion) continue;
    Ctx sub{c.report, c.table, c.prefix + id + "/"};
    out.at_mut(id).attrs["body"] =
        GraphRef(std::make_shared<const Graph>(naive_level(*n.attr_graph("body"), sub)));
  }
  std::vector<std::string> mats;
  for (const auto& [id, n] : out.nodes())
    if (n.kind == OpKind::MatMul) mats.push_back(id);
  for (const std::string& id : mats) {
    Node m = out.at(id);
    auto range_pair = [&](const char* lo_suffix, const char* hi_suffix,
                          const EdgeRef& src) {
      std::string mn = out.fresh_id(id + lo_suffix);
      c.log_added(out.add(make_node(mn, OpKind::MinOp, {src})));
      std::string mx = out.fresh_id(id + hi_suffix);
      c.log_added(out.add(make_node(mx, OpKind::MaxOp, {src})));
      return std::pair<EdgeRef, EdgeRef>{{mn, 0}, {mx, 0}};
    };
    auto [amin, amax] = range_pair(".amin", ".amax", m.inputs[0]);
    auto [bmin, bmax] = range_pair(".bmin", ".bmax", m.inputs[1]);
    std::string qmm = add_quantized_core(out, c, m, amin, amax, bmin, bmax);
    std::string rr = out.fresh_id(id + ".rr");
    c.log_added(out.add(
        make_node(rr, OpKind::RequantizationRange, {{qmm, 0}, {qmm, 1}, {qmm, 2}})));
    std::string rq = out.fresh_id(id + ".rq");
    c.log_added(out.add(make_node(
        rq, OpKind::Requantize, {{qmm, 0}, {qmm, 1}, {qmm, 2}, {rr, 0}, {rr, 1}})));
    out.remove(id);
    add_dequantize_at(out, c, id, {{rq, 0}, {rq, 1}, {rq, 2}});
  }
  return out;
}

const TapCalibration& require_tap(const Ctx& c, const std::string& node_id,
                                  int input) {
  const TapCalibration* t = c.table->find(tap_id(c.prefix + node_id, input));
  if (!t)
    fail(Errc::MissingTapEntry,
         "calibration table lacks tap '" + tap_id(c.prefix + node_id, input) + "'");
  return *t;
}

Graph calibrated_level(const Graph& g, Ctx& c, bool in_loop) {
  Graph out = g;
  for (auto& [id, n] : out.nodes_mut()) {
    if (n.kind != OpKind::LoopRegion) continue;
    Ctx sub{c.report, c.table, c.prefix + id + "/"};
    out.at_mut(id).attrs["body"] = GraphRef(std::make_shared<const Graph>(
        calibrated_level(*n.attr_graph("body"), sub, true)));
  }
  auto cons = consumers(out);
  std::vector<std::string> mats;
  for (const auto& [id, n] : out.nodes())
    if (n.kind == OpKind::MatMul) mats.push_back(id);
  for (const std::string& id : mats) {
    Node m = out.at(id);
    const TapCalibration& ta = require_tap(c, id, 0);
    const TapCalibration& tb = require_tap(c, id, 1);
    if (!ta.quantize || !tb.quantize) continue;  // sparse operand: stay FP32

    auto const_pair = [&](const char* lo_suffix, const char* hi_suffix,
                          const ThresholdPair& t) {
      std::string lo = out.fresh_id(id + lo_suffix);
      c.log_added(out.add(const_scalar(lo, t.t_min)));
      std::string hi = out.fresh_id(id + hi_suffix);
      c.log_added(out.add(const_scalar(hi, t.t_max)));
      return std::pair<EdgeRef, EdgeRef>{{lo, 0}, {hi, 0}};
    };
    auto [amin, amax] = const_pair(".amin", ".amax", ta.thresholds);
    auto [bmin, bmax] = const_pair(".bmin", ".bmax", tb.thresholds);
    std::string qmm = add_quantized_core(out, c, m, amin, amax, bmin, bmax);

    // A matmul feeding exactly one loop-interior gather keeps a Requantize
    // stage so the gather pass can move the Dequantize behind the gather;
    // every other consumer reads FP32 straight off the accumulator.
    const TapCalibration* gather_tap = nullptr;
    if (in_loop) {
      bool is_output = false;
      for (const EdgeRef& e : out.outputs())
        if (e.first == id) is_output = true;
      auto it = cons.find(id);
      if (!is_output && it != cons.end() && it->second.size() == 1 &&
          it->second[0].second == 0) {
        const Node& user = out.at(it->second[0].first);
        if (user.kind == OpKind::GatherNd) {
          const TapCalibration* gt =
              c.table->find(tap_id(c.prefix + user.id, 0));
          if (gt && gt->quantize) gather_tap = gt;
        }
      }
    }
    out.remove(id);
    if (gather_tap) {
      auto [omin, omax] = const_pair(".omin", ".omax", gather_tap->thresholds);
      std::string rq = out.fresh_id(id + ".rq");
      c.log_added(out.add(make_node(
          rq, OpKind::Requantize, {{qmm, 0}, {qmm, 1}, {qmm, 2}, omin, omax})));
      add_dequantize_at(out, c, id, {{rq, 0}, {rq, 1}, {rq, 2}});
    } else {
      add_dequantize_at(out, c, id, {{qmm, 0}, {qmm, 1}, {qmm, 2}});
    }
  }
  return out;
}

Graph gathernd_level(const Graph& g, Ctx& c, bool in_loop) {
  Graph out = g;
  for (auto& [id, n] : out.nodes_mut()) {
    if (n.kind != OpKind::LoopRegion) continue;
    Ctx sub{c.report, c.table, c.prefix + id + "/"};
    out.at_mut(id).attrs["body"] = GraphRef(std::make_shared<const Graph>(
        gathernd_level(*n.attr_graph("body"), sub, true)));
  }
  if (!in_loop) return out;

  auto cons = consumers(out);
  std::vector<std::string> gathers;
  for (const auto& [id, n] : out.nodes())
    if (n.kind == OpKind::GatherNd) gathers.push_back(id);
  for (const std::string& gid : gathers) {
    const Node& gn = out.at(gid);
    const EdgeRef params = gn.inputs[0];
    if (params.second != 0) continue;
    const Node& d = out.at(params.first);
    if (d.kind != OpKind::Dequantize) continue;
    // Only narrow payloads are worth moving; the calibrated pass leaves a
    // Requantize exactly where that holds.
    if (out.at(d.inputs[0].first).kind != OpKind::Requantize) continue;
    auto it = cons.find(d.id);
    if (it == cons.end() || it->second.size() != 1) continue;
    bool d_is_output = false;
    for (const EdgeRef& e : out.outputs())
      if (e.first == d.id) d_is_output = true;
    if (d_is_output) continue;

    std::string did = d.id;
    std::vector<EdgeRef> dsrc = d.inputs;  // (int data, min, max)
    Node& gnode = out.at_mut(gid);
    gnode.kind = OpKind::QuantizedGatherNd;
    gnode.inputs = {dsrc[0], gnode.inputs[1], dsrc[1], dsrc[2]};
    Node& dnode = out.at_mut(did);
    dnode.inputs = {{gid, 0}, {gid, 1}, {gid, 2}};
    for (auto& [cid, cn] : out.nodes_mut()) {
      if (cid == did) continue;
      for (EdgeRef& e : cn.inputs)
        if (e.first == gid && e.second == 0) e = {did, 0};
    }
    std::vector<EdgeRef> outs = out.outputs();
    for (EdgeRef& e : outs)
      if (e.first == gid && e.second == 0) e = {did, 0};
    out.set_outputs(std::move(outs));
    c.log_replaced(gid, OpKind::QuantizedGatherNd);
  }
  return out;
}

PassReport start_report(const char* name, const Graph& g) {
  PassReport r;
  r.pass = name;
  r.census_before = op_census(g);
  return r;
}

}  // namespace

std::string PassReport::to_json() const {
  json j;
  j["pass"] = pass;
  j["added"] = pairs_to_json(added);
  j["removed"] = pairs_to_json(removed);
  j["replaced"] = pairs_to_json(replaced);
  j["census_before"] = census_to_json(census_before);
  j["census_after"] = census_to_json(census_after);
  return j.dump(2) + "\n";
}

std::pair<Graph, PassReport> naive_quantize_pass(const Graph& g) {
  validate_or_throw(g);
  PassReport r = start_report("naive_quantize", g);
  Ctx c{&r, nullptr, ""};
  Graph out = naive_level(g, c);
  r.census_after = op_census(out);
  return {std::move(out), std::move(r)};
}

std::pair<Graph, PassReport> calibrated_quantize_pass(
    const Graph& g, const CalibrationTable& table) {
  validate_or_throw(g);
  PassReport r = start_report("calibrated_quantize", g);
  Ctx c{&r, &table, ""};
  Graph out = calibrated_level(g, c, false);
  r.census_after = op_census(out);
  return {std::move(out), std::move(r)};
}

std::pair<Graph, PassReport> quantize_gathernd_pass(
    const Graph& g, const CalibrationTable& table) {
  validate_or_throw(g);
  PassReport r = start_report("quantize_gathernd", g);
  Ctx c{&r, &table, ""};
  Graph out = gathernd_level(g, c, false);
  r.census_after = op_census(out);
  return {std::move(out), std::move(r)};
}

EquivalenceReport verify_equivalence(const Graph& a, const Graph& b,
                                     const std::vector<Feeds>& feeds,
                                     double tol) {
  if (a.outputs().size() != b.outputs().size())
    fail(Errc::InvalidArgument, "graphs declare different output counts");
  Executor ea(a), eb(b);
  EquivalenceReport rep;
  rep.outputs.resize(a.outputs().size());
  for (size_t i = 0; i < a.outputs().size(); ++i)
    rep.outputs[i].output =
        output_key(a.outputs()[i].first, a.outputs()[i].second);

  for (const Feeds& f : feeds) {
    auto ra = ea.run(f);
    auto rb = eb.run(f);
    for (size_t i = 0; i < a.outputs().size(); ++i) {
      const Tensor& ta = ra.at(output_key(a.outputs()[i].first, a.outputs()[i].second));
      const Tensor& tb = rb.at(output_key(b.outputs()[i].first, b.outputs()[i].second));
      if (ta.shape() != tb.shape() || ta.dtype() != tb.dtype())
        fail(Errc::InvalidArgument,
             "output " + rep.outputs[i].output + " differs structurally");
      double num = 0.0, den = 0.0, max_abs = 0.0;
      for (int64_t j = 0; j < ta.numel(); ++j) {
        double x, y;
        switch (ta.dtype()) {
          case DType::F32:
            x = ta.f32()[static_cast<size_t>(j)];
            y = tb.f32()[static_cast<size_t>(j)];
            break;
          case DType::S8:
            x = ta.s8()[static_cast<size_t>(j)];
            y = tb.s8()[static_cast<size_t>(j)];
            break;
          case DType::U8:
            x = ta.u8()[static_cast<size_t>(j)];
            y = tb.u8()[static_cast<size_t>(j)];
            break;
          case DType::S32:
            x = ta.s32()[static_cast<size_t>(j)];
            y = tb.s32()[static_cast<size_t>(j)];
            break;
          default:
            x = y = 0.0;
            break;
        }
        num += (y - x) * (y - x);
        den += x * x;
        max_abs = std::max(max_abs, std::abs(y - x));
      }
      double rel;
      if (den > 0)
        rel = std::sqrt(num / den);
      else
        rel = num > 0 ? std::numeric_limits<double>::infinity() : 0.0;
      rep.outputs[i].max_abs = std::max(rep.outputs[i].max_abs, max_abs);
      rep.outputs[i].rel_l2 = std::max(rep.outputs[i].rel_l2, rel);
    }
  }
  for (const OutputDelta& d : rep.outputs)
    rep.worst_rel_l2 = std::max(rep.worst_rel_l2, d.rel_l2);
  rep.pass = rep.worst_rel_l2 <= tol;
  return rep;
}

std::string EquivalenceReport::to_json() const {
  json arr = json::array();
  for (const OutputDelta& d : outputs)
    arr.push_back({{"output", d.output},
                   {"max_abs", d.max_abs},
                   {"rel_l2", d.rel_l2}});
  json j;
  j["outputs"] = arr;
  j["worst_rel_l2"] = worst_rel_l2;
  j["pass"] = pass;
  return j.dump(2) + "\n";
}

}  // namespace qgraph
