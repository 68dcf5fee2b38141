// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>

#include "qgraph/graph.hpp"
#include "qgraph/tensor.hpp"
#include "qgraph/trace.hpp"

namespace qgraph {

using Feeds = std::map<std::string, Tensor>;

// Observes the tensor flowing into (consumer node, input index). Inside a
// LoopRegion the consumer id carries a "loopid/" prefix and the observer
// fires once per step. Used by calibration's histogram collection.
using EdgeObserver =
    std::function<void(const std::string& consumer, int input, const Tensor& value)>;

struct ExecOptions {
  Trace* trace = nullptr;            // optional per-node timing/payload sink
  const EdgeObserver* observer = nullptr;
};

// Reusable runner for one immutable graph. Construction validates; run()
// is const and safe to call from one thread per Executor instance.
class Executor {
 public:
  explicit Executor(const Graph& g);

  // Feeds must cover exactly the graph's placeholders (matching dtypes).
  // Returns the declared outputs keyed "nodeid:slot".
  std::map<std::string, Tensor> run(const Feeds& feeds, const ExecOptions& opts = {}) const;

 private:
  const Graph& g_;
  std::vector<std::string> order_;
};

// One-shot convenience.
std::map<std::string, Tensor> execute(const Graph& g, const Feeds& feeds,
                                      const ExecOptions& opts = {});

// The key format used for executor outputs.
std::string output_key(const std::string& node, int slot);

}  // namespace qgraph
