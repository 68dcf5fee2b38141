// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/trace.hpp"

#include <json.hpp>

namespace qgraph {

int64_t bytes_moved(const Trace& trace) {
  int64_t total = 0;
  for (const TraceRecord& r : trace.records) total += r.payload_bytes;
  return total;
}

std::map<std::string, int64_t> gather_bytes_by_node(const Trace& trace) {
  std::map<std::string, int64_t> out;
  for (const TraceRecord& r : trace.records)
    if (r.payload_bytes > 0) out[r.node] += r.payload_bytes;
  return out;
}

std::string trace_to_jsonl(const Trace& trace) {
  std::string out;
  for (const TraceRecord& r : trace.records) {
    nlohmann::json j;
    j["node"] = r.node;
    j["kind"] = r.kind;
    j["micros"] = r.micros;
    j["payload_bytes"] = r.payload_bytes;
    j["out_elems"] = r.out_elems;
    out += j.dump();
    out += "\n";
  }
  return out;
}

}  // namespace qgraph
