// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace qgraph {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Const: return "Const";
    case OpKind::MatMul: return "MatMul";
    case OpKind::QuantizedMatMul: return "QuantizedMatMul";
    case OpKind::QuantizeV2: return "QuantizeV2";
    case OpKind::Dequantize: return "Dequantize";
    case OpKind::Requantize: return "Requantize";
    case OpKind::RequantizationRange: return "RequantizationRange";
    case OpKind::MinOp: return "MinOp";
    case OpKind::MaxOp: return "MaxOp";
    case OpKind::Softmax: return "Softmax";
    case OpKind::LayerNorm: return "LayerNorm";
    case OpKind::GatherNd: return "GatherNd";
    case OpKind::QuantizedGatherNd: return "QuantizedGatherNd";
    case OpKind::Add: return "Add";
    case OpKind::Scale: return "Scale";
    case OpKind::Concat: return "Concat";
    case OpKind::LoopRegion: return "LoopRegion";
  }
  return "?";
}

OpKind op_from_name(const std::string& s) {
  static const std::map<std::string, OpKind> table = {
      {"Const", OpKind::Const},
      {"MatMul", OpKind::MatMul},
      {"QuantizedMatMul", OpKind::QuantizedMatMul},
      {"QuantizeV2", OpKind::QuantizeV2},
      {"Dequantize", OpKind::Dequantize},
      {"Requantize", OpKind::Requantize},
      {"RequantizationRange", OpKind::RequantizationRange},
      {"MinOp", OpKind::MinOp},
      {"MaxOp", OpKind::MaxOp},
      {"Softmax", OpKind::Softmax},
      {"LayerNorm", OpKind::LayerNorm},
      {"GatherNd", OpKind::GatherNd},
      {"QuantizedGatherNd", OpKind::QuantizedGatherNd},
      {"Add", OpKind::Add},
      {"Scale", OpKind::Scale},
      {"Concat", OpKind::Concat},
      {"LoopRegion", OpKind::LoopRegion},
  };
  auto it = table.find(s);
  if (it == table.end()) fail(Errc::SchemaError, "unknown op kind '" + s + "'");
  return it->second;
}

namespace {
const AttrValue& need_attr(const Node& n, const std::string& name) {
  auto it = n.attrs.find(name);
  if (it == n.attrs.end())
    fail(Errc::SchemaError, "node '" + n.id + "' missing attr '" + name + "'");
  return it->second;
}
template <typename T>
const T& attr_as(const Node& n, const std::string& name) {
  const AttrValue& v = need_attr(n, name);
  const T* p = std::get_if<T>(&v);
  if (!p)
    fail(Errc::SchemaError, "node '" + n.id + "' attr '" + name + "' has wrong type");
  return *p;
}
}  // namespace

int64_t Node::attr_int(const std::string& name) const { return attr_as<int64_t>(*this, name); }
double Node::attr_real(const std::string& name) const {
  const AttrValue& v = need_attr(*this, name);
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const int64_t* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  fail(Errc::SchemaError, "node '" + id + "' attr '" + name + "' is not numeric");
}
bool Node::attr_bool(const std::string& name, bool fallback) const {
  auto it = attrs.find(name);
  if (it == attrs.end()) return fallback;
  if (const bool* b = std::get_if<bool>(&it->second)) return *b;
  fail(Errc::SchemaError, "node '" + id + "' attr '" + name + "' is not bool");
}
const std::string& Node::attr_str(const std::string& name) const {
  return attr_as<std::string>(*this, name);
}
const Tensor& Node::attr_tensor(const std::string& name) const {
  return attr_as<Tensor>(*this, name);
}
GraphRef Node::attr_graph(const std::string& name) const {
  return attr_as<GraphRef>(*this, name);
}
const std::vector<std::string>& Node::attr_strs(const std::string& name) const {
  return attr_as<std::vector<std::string>>(*this, name);
}

Node& Graph::add(Node n) {
  if (n.id.empty()) fail(Errc::SchemaError, "node with empty id");
  auto [it, inserted] = nodes_.emplace(n.id, std::move(n));
  if (!inserted) fail(Errc::SchemaError, "duplicate node id '" + it->first + "'");
  return it->second;
}

const Node& Graph::at(const std::string& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) fail(Errc::SchemaError, "no node '" + id + "'");
  return it->second;
}

Node& Graph::at_mut(const std::string& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) fail(Errc::SchemaError, "no node '" + id + "'");
  return it->second;
}

void Graph::remove(const std::string& id) {
  if (nodes_.erase(id) == 0) fail(Errc::SchemaError, "no node '" + id + "' to remove");
}

std::string Graph::fresh_id(const std::string& base) const {
  if (!has(base)) return base;
  for (int i = 2;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!has(cand)) return cand;
  }
}

int n_outputs(const Node& n) {
  switch (n.kind) {
    case OpKind::QuantizedMatMul:
    case OpKind::QuantizeV2:
    case OpKind::Requantize:
    case OpKind::QuantizedGatherNd:
      return 3;
    case OpKind::RequantizationRange:
      return 2;
    case OpKind::LoopRegion: {
      // Final carried values plus stacked per-step emissions.
      size_t carried = n.attr_strs("carried").size();
      size_t body_outs = n.attr_graph("body")->outputs().size();
      return static_cast<int>(std::max(carried, body_outs));
    }
    default:
      return 1;
  }
}

std::vector<std::string> topo_order(const Graph& g) {
  std::map<std::string, int> indeg;
  std::map<std::string, std::set<std::string>> succ;
  for (const auto& [id, n] : g.nodes()) {
    indeg.emplace(id, 0);
    for (const auto& [src, slot] : n.inputs) {
      (void)slot;
      if (!g.has(src)) continue;  // validation reports dangling edges
      if (succ[src].insert(id).second) ++indeg[id];
    }
  }
  std::set<std::string> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.insert(id);
  std::vector<std::string> order;
  order.reserve(g.size());
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    auto it = succ.find(id);
    if (it == succ.end()) continue;
    for (const std::string& nxt : it->second)
      if (--indeg[nxt] == 0) ready.insert(nxt);
  }
  if (order.size() != g.size())
    fail(Errc::CycleDetected, "graph '" + g.name + "' contains a cycle");
  return order;
}

std::map<OpKind, int64_t> op_census(const Graph& g) {
  std::map<OpKind, int64_t> counts;
  for (const auto& [id, n] : g.nodes()) {
    (void)id;
    ++counts[n.kind];
    if (n.kind == OpKind::LoopRegion && n.has_attr("body")) {
      for (const auto& [k, c] : op_census(*n.attr_graph("body"))) counts[k] += c;
    }
  }
  return counts;
}

std::map<std::string, std::vector<std::pair<std::string, int>>> consumers(const Graph& g) {
  std::map<std::string, std::vector<std::pair<std::string, int>>> out;
  for (const auto& [id, n] : g.nodes())
    for (size_t i = 0; i < n.inputs.size(); ++i)
      out[n.inputs[i].first].push_back({id, static_cast<int>(i)});
  return out;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& i : issues) {
    if (!i.node.empty()) os << i.node << ": ";
    os << "[" << i.category << "] " << i.message << "\n";
  }
  return os.str();
}

namespace {

class Validator {
 public:
  explicit Validator(const Graph& g) : g_(g) {}

  ValidationReport run() {
    check_edges();
    std::vector<std::string> order;
    bool have_order = true;
    try {
      order = topo_order(g_);
    } catch (const Error&) {
      add("", "cycle", "graph contains a cycle");
      have_order = false;
    }
    if (have_order)
      for (const std::string& id : order) check_node(g_.at(id));
    check_outputs();
    return std::move(report_);
  }

 private:
  void add(const std::string& node, const std::string& cat, const std::string& msg) {
    report_.issues.push_back({node, cat, msg});
  }

  void check_edges() {
    for (const auto& [id, n] : g_.nodes()) {
      for (const auto& [src, slot] : n.inputs) {
        if (!g_.has(src)) {
          add(id, "dangling", "input references missing node '" + src + "'");
          continue;
        }
        const Node& p = g_.at(src);
        int outs = 1;
        try {
          outs = n_outputs(p);
        } catch (const Error&) {
          continue;  // malformed producer attrs reported at that node
        }
        if (slot < 0 || slot >= outs)
          add(id, "slot", "slot " + std::to_string(slot) + " of '" + src + "' (has " +
                              std::to_string(outs) + " outputs)");
      }
    }
  }

  void check_outputs() {
    for (const auto& [src, slot] : g_.outputs()) {
      if (!g_.has(src)) {
        add("", "output", "output references missing node '" + src + "'");
        continue;
      }
      try {
        if (slot < 0 || slot >= n_outputs(g_.at(src)))
          add("", "output", "output slot " + std::to_string(slot) + " of '" + src + "'");
      } catch (const Error&) {
      }
    }
  }

  // Inferred dtype per (node, slot); missing means the producer had issues.
  std::map<std::string, std::vector<DType>> dtypes_;

  bool input_dtype(const Node& n, size_t i, DType* out) {
    if (i >= n.inputs.size()) return false;
    const auto& [src, slot] = n.inputs[i];
    auto it = dtypes_.find(src);
    if (it == dtypes_.end()) return false;
    if (slot < 0 || static_cast<size_t>(slot) >= it->second.size()) return false;
    *out = it->second[static_cast<size_t>(slot)];
    return true;
  }

  void want(const Node& n, size_t i, std::initializer_list<DType> allowed) {
    DType got;
    if (!input_dtype(n, i, &got)) return;
    for (DType d : allowed)
      if (d == got) return;
    std::string names;
    for (DType d : allowed) names += std::string(names.empty() ? "" : "|") + dtype_name(d);
    add(n.id, "dtype-mismatch", "input " + std::to_string(i) + " is " +
                                    dtype_name(got) + ", wants " + names);
  }

  bool check_arity(const Node& n, size_t want_n) {
    if (n.inputs.size() != want_n) {
      add(n.id, "arity", std::string(op_name(n.kind)) + " wants " +
                             std::to_string(want_n) + " inputs, has " +
                             std::to_string(n.inputs.size()));
      return false;
    }
    return true;
  }

  void check_node(const Node& n) {
    std::vector<DType> outs;
    switch (n.kind) {
      case OpKind::Const: {
        check_arity(n, 0);
        if (n.has_attr("value")) {
          try {
            outs = {n.attr_tensor("value").dtype()};
          } catch (const Error& e) {
            add(n.id, "attr", e.what());
          }
        } else if (n.has_attr("dtype")) {
          try {
            outs = {dtype_from_name(n.attr_str("dtype"))};
          } catch (const Error& e) {
            add(n.id, "attr", e.what());
          }
        } else {
          add(n.id, "attr", "Const needs a 'value' tensor or a declared 'dtype'");
        }
        break;
      }
      case OpKind::MatMul:
        if (check_arity(n, 2)) {
          want(n, 0, {DType::F32});
          want(n, 1, {DType::F32});
        }
        outs = {DType::F32};
        break;
      case OpKind::QuantizedMatMul:
        if (check_arity(n, 6)) {
          want(n, 0, {DType::S8});
          want(n, 1, {DType::U8});
          for (size_t i = 2; i < 6; ++i) want(n, i, {DType::F32});
        }
        outs = {DType::S32, DType::F32, DType::F32};
        break;
      case OpKind::QuantizeV2: {
        DType target = DType::U8;
        bool have_target = false;
        if (!n.has_attr("target")) {
          add(n.id, "attr", "QuantizeV2 needs a 'target' dtype attr");
        } else {
          try {
            target = dtype_from_name(n.attr_str("target"));
            have_target = target == DType::S8 || target == DType::U8;
          } catch (const Error&) {
          }
          if (!have_target) add(n.id, "attr", "QuantizeV2 target must be S8 or U8");
        }
        if (check_arity(n, 3))
          for (size_t i = 0; i < 3; ++i) want(n, i, {DType::F32});
        outs = {have_target ? target : DType::U8, DType::F32, DType::F32};
        break;
      }
      case OpKind::Dequantize:
        if (check_arity(n, 3)) {
          want(n, 0, {DType::S8, DType::U8, DType::S32});
          want(n, 1, {DType::F32});
          want(n, 2, {DType::F32});
        }
        outs = {DType::F32};
        break;
      case OpKind::Requantize:
        if (check_arity(n, 5)) {
          want(n, 0, {DType::S32});
          for (size_t i = 1; i < 5; ++i) want(n, i, {DType::F32});
        }
        outs = {DType::U8, DType::F32, DType::F32};
        break;
      case OpKind::RequantizationRange:
        if (check_arity(n, 3)) {
          want(n, 0, {DType::S32});
          want(n, 1, {DType::F32});
          want(n, 2, {DType::F32});
        }
        outs = {DType::F32, DType::F32};
        break;
      case OpKind::MinOp:
      case OpKind::MaxOp:
      case OpKind::Softmax:
        if (check_arity(n, 1)) want(n, 0, {DType::F32});
        outs = {DType::F32};
        break;
      case OpKind::Scale:
        if (check_arity(n, 1)) want(n, 0, {DType::F32});
        if (!n.has_attr("factor")) add(n.id, "attr", "Scale needs a 'factor' attr");
        outs = {DType::F32};
        break;
      case OpKind::LayerNorm:
        if (check_arity(n, 3))
          for (size_t i = 0; i < 3; ++i) want(n, i, {DType::F32});
        outs = {DType::F32};
        break;
      case OpKind::GatherNd: {
        DType params = DType::F32;
        if (check_arity(n, 2)) {
          input_dtype(n, 0, &params);
          want(n, 1, {DType::S32});
        }
        outs = {params};
        break;
      }
      case OpKind::QuantizedGatherNd: {
        DType params = DType::U8;
        if (check_arity(n, 4)) {
          want(n, 0, {DType::S8, DType::U8, DType::S32});
          input_dtype(n, 0, &params);
          want(n, 1, {DType::S32});
          want(n, 2, {DType::F32});
          want(n, 3, {DType::F32});
        }
        outs = {params, DType::F32, DType::F32};
        break;
      }
      case OpKind::Add:
        if (check_arity(n, 2)) {
          want(n, 0, {DType::F32});
          want(n, 1, {DType::F32});
        }
        outs = {DType::F32};
        break;
      case OpKind::Concat: {
        if (n.inputs.size() < 1)
          add(n.id, "arity", "Concat needs at least one input");
        for (size_t i = 0; i < n.inputs.size(); ++i) want(n, i, {DType::F32});
        if (!n.has_attr("axis")) add(n.id, "attr", "Concat needs an 'axis' attr");
        outs = {DType::F32};
        break;
      }
      case OpKind::LoopRegion:
        outs = check_loop(n);
        break;
    }
    dtypes_[n.id] = std::move(outs);
  }

  std::vector<DType> check_loop(const Node& n) {
    std::vector<DType> outs;
    if (!n.has_attr("body") || !n.has_attr("carried") || !n.has_attr("steps")) {
      add(n.id, "attr", "LoopRegion needs 'steps', 'body', and 'carried' attrs");
      return outs;
    }
    GraphRef body;
    std::vector<std::string> carried;
    int64_t steps = 0;
    try {
      body = n.attr_graph("body");
      carried = n.attr_strs("carried");
      steps = n.attr_int("steps");
    } catch (const Error& e) {
      add(n.id, "attr", e.what());
      return outs;
    }
    if (steps < 0) add(n.id, "attr", "steps must be >= 0");

    ValidationReport sub = validate(*body);
    for (const auto& i : sub.issues)
      add(n.id, "loop", "body node '" + i.node + "' [" + i.category + "] " + i.message);

    if (n.inputs.size() != carried.size())
      add(n.id, "arity", "LoopRegion has " + std::to_string(n.inputs.size()) +
                             " inputs for " + std::to_string(carried.size()) +
                             " carried values");
    if (body->outputs().size() < carried.size())
      add(n.id, "loop", "body emits fewer outputs than carried values");

    // Every body placeholder must be a carried value or a per-step feed.
    std::set<std::string> covered(carried.begin(), carried.end());
    std::map<std::string, DType> ph;
    for (const auto& [id, bn] : body->nodes())
      if (bn.is_placeholder()) {
        if (bn.has_attr("dtype")) {
          try {
            ph[id] = dtype_from_name(bn.attr_str("dtype"));
          } catch (const Error&) {
          }
        }
      }
    for (const std::string& c : carried)
      if (!body->has(c) || !body->at(c).is_placeholder())
        add(n.id, "loop", "carried id '" + c + "' is not a body placeholder");
    for (const auto& [key, val] : n.attrs) {
      if (key.rfind(kPerStepPrefix, 0) != 0) continue;
      std::string target = key.substr(std::string(kPerStepPrefix).size());
      covered.insert(target);
      if (!body->has(target) || !body->at(target).is_placeholder()) {
        add(n.id, "loop", "per-step feed targets '" + target + "', not a body placeholder");
        continue;
      }
      const Tensor* t = std::get_if<Tensor>(&val);
      if (!t) {
        add(n.id, "attr", "per-step feed '" + target + "' must be a tensor");
        continue;
      }
      if (t->rank() < 1 || t->dim(0) != steps)
        add(n.id, "loop", "per-step feed '" + target + "' leading extent must equal steps");
      auto it = ph.find(target);
      if (it != ph.end() && t->dtype() != it->second)
        add(n.id, "loop", "per-step feed '" + target + "' dtype mismatch");
    }
    for (const auto& [id, d] : ph) {
      (void)d;
      if (!covered.count(id))
        add(n.id, "loop", "body placeholder '" + id + "' is neither carried nor per-step");
    }

    // Output dtypes come from the body's declared outputs.
    std::map<std::string, std::vector<DType>> body_dtypes = infer_body_dtypes(*body);
    for (size_t i = 0; i < body->outputs().size(); ++i) {
      const auto& [src, slot] = body->outputs()[i];
      DType d = DType::F32;
      auto it = body_dtypes.find(src);
      if (it != body_dtypes.end() && slot >= 0 &&
          static_cast<size_t>(slot) < it->second.size())
        d = it->second[static_cast<size_t>(slot)];
      outs.push_back(d);
      if (i < carried.size()) {
        auto pit = ph.find(carried[i]);
        if (pit != ph.end() && pit->second != d)
          add(n.id, "loop", "carried value '" + carried[i] + "' dtype changes across steps");
      }
    }
    return outs;
  }

  // Dtype-only pass over a body graph (issues are reported by the recursive
  // validate above; here we just need the output dtypes).
  static std::map<std::string, std::vector<DType>> infer_body_dtypes(const Graph& body) {
    Validator v(body);
    try {
      for (const std::string& id : topo_order(body)) v.check_node(body.at(id));
    } catch (const Error&) {
    }
    return std::move(v.dtypes_);
  }

  const Graph& g_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate(const Graph& g) { return Validator(g).run(); }

void validate_or_throw(const Graph& g) {
  ValidationReport r = validate(g);
  if (!r.ok())
    fail(Errc::SchemaError, "graph '" + g.name + "' failed validation:\n" + r.to_string());
}

}  // namespace qgraph
