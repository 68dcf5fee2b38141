// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qgraph {

// One executed node. Loop-body nodes appear once per step under a
// "loopid/" prefixed id. payload_bytes is nonzero only for gather ops:
// the exact number of bytes copied out of the params tensor.
struct TraceRecord {
  std::string node;
  std::string kind;
  int64_t micros = 0;
  int64_t payload_bytes = 0;
  int64_t out_elems = 0;
};

struct Trace {
  std::vector<TraceRecord> records;

  void clear() { records.clear(); }
};

// Total gather payload bytes across the trace.
int64_t bytes_moved(const Trace& trace);

// Gather payload bytes keyed by node id (loop steps summed).
std::map<std::string, int64_t> gather_bytes_by_node(const Trace& trace);

// One JSON object per line.
std::string trace_to_jsonl(const Trace& trace);

}  // namespace qgraph
