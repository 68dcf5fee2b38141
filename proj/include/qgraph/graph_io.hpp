// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "qgraph/graph.hpp"

namespace qgraph {

// Tensor literal form: {"dtype": "F32", "shape": [..], "data": [..]}.
// F32 payloads round-trip bit-exactly (shortest-representation doubles);
// non-finite values are rejected rather than silently mangled.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j, const std::string& path);

// Graph file format, schema v1:
//   {"name": str,
//    "nodes": [{"id": str, "kind": str, "inputs": [[id, slot]...], "attrs": {...}}],
//    "outputs": [[id, slot]...]}
// Node order in the file is canonical (sorted by id). load(save(g))
// reproduces the graph structurally, bit-exact on tensor payloads.
nlohmann::json graph_to_json(const Graph& g);
Graph graph_from_json(const nlohmann::json& j, const std::string& path = "$");

std::string save_graph(const Graph& g);
Graph load_graph(const std::string& text);

void save_graph_file(const Graph& g, const std::string& file);
Graph load_graph_file(const std::string& file);

// Shared file plumbing (IoError on failure).
std::string read_text_file(const std::string& file);
void write_text_file(const std::string& file, const std::string& text);

}  // namespace qgraph
