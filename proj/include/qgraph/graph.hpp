// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qgraph/tensor.hpp"

namespace qgraph {

class Graph;
using GraphRef = std::shared_ptr<const Graph>;

enum class OpKind {
  Const,
  MatMul,
  QuantizedMatMul,
  QuantizeV2,
  Dequantize,
  Requantize,
  RequantizationRange,
  MinOp,
  MaxOp,
  Softmax,
  LayerNorm,
  GatherNd,
  QuantizedGatherNd,
  Add,
  Scale,
  Concat,
  LoopRegion,
};

const char* op_name(OpKind k);
OpKind op_from_name(const std::string& s);

// Node attributes: scalars, tensors, a nested sub-graph (LoopRegion body),
// or a list of strings (loop-carried placeholder ids).
using AttrValue = std::variant<int64_t, double, bool, std::string, Tensor,
                               GraphRef, std::vector<std::string>>;

// An edge reference: producing node id plus output slot.
using EdgeRef = std::pair<std::string, int>;

struct Node {
  std::string id;
  OpKind kind = OpKind::Const;
  std::vector<EdgeRef> inputs;
  std::map<std::string, AttrValue> attrs;

  bool has_attr(const std::string& name) const { return attrs.count(name) != 0; }
  int64_t attr_int(const std::string& name) const;
  double attr_real(const std::string& name) const;
  bool attr_bool(const std::string& name, bool fallback) const;
  const std::string& attr_str(const std::string& name) const;
  const Tensor& attr_tensor(const std::string& name) const;
  GraphRef attr_graph(const std::string& name) const;
  const std::vector<std::string>& attr_strs(const std::string& name) const;

  // Const node with no payload: a graph input fed at execution time.
  bool is_placeholder() const { return kind == OpKind::Const && !has_attr("value"); }
};

class Graph {
 public:
  std::string name;

  Graph() = default;
  explicit Graph(std::string n) : name(std::move(n)) {}

  Node& add(Node n);
  bool has(const std::string& id) const { return nodes_.count(id) != 0; }
  const Node& at(const std::string& id) const;
  Node& at_mut(const std::string& id);
  void remove(const std::string& id);
  size_t size() const { return nodes_.size(); }

  // Nodes in id order (the canonical serialization order).
  const std::map<std::string, Node>& nodes() const { return nodes_; }
  std::map<std::string, Node>& nodes_mut() { return nodes_; }

  const std::vector<EdgeRef>& outputs() const { return outputs_; }
  void set_outputs(std::vector<EdgeRef> outs) { outputs_ = std::move(outs); }

  // `base` if unused, else base_2, base_3, ...
  std::string fresh_id(const std::string& base) const;

 private:
  std::map<std::string, Node> nodes_;
  std::vector<EdgeRef> outputs_;
};

// Output slot count of a node (LoopRegion derives it from its body).
int n_outputs(const Node& n);

// Deterministic topological order: Kahn's algorithm, ties broken by id.
// Throws CycleDetected.
std::vector<std::string> topo_order(const Graph& g);

struct ValidationIssue {
  std::string node;      // empty for graph-level issues
  std::string category;  // arity | dangling | slot | dtype-mismatch | attr | cycle | loop | output
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

// Structural and type checks: unique ids are guaranteed by the container;
// checks arities, dangling edges, slot ranges, per-kind dtype signatures,
// required attributes, acyclicity, and LoopRegion body consistency.
ValidationReport validate(const Graph& g);
void validate_or_throw(const Graph& g);

// Node counts per kind, including LoopRegion bodies.
std::map<OpKind, int64_t> op_census(const Graph& g);

// Reverse edges: producer id -> list of (consumer id, input index).
std::map<std::string, std::vector<std::pair<std::string, int>>> consumers(const Graph& g);

// Attr key prefix marking per-step loop feeds ("per_step:<placeholder id>").
inline const char* kPerStepPrefix = "per_step:";

}  // namespace qgraph
