// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qgraph/executor.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/rng.hpp"
#include "qgraph/tensor.hpp"

namespace qgraph {

// One input sentence. tokens is non-empty; word_count >= 1 and is metadata
// from the original text, so it need not track the token count in either
// direction.
struct Sentence {
  int64_t id = 0;
  std::vector<int32_t> tokens;
  int64_t word_count = 1;
};

struct CorpusConfig {
  int64_t count = 512;
  int64_t vocab = 16;
  int64_t min_len = 4;       // shortest sentence; keep >= the model's beam
  double geometric_p = 0.25; // extra length ~ Geometric(p), mean (1-p)/p
  uint64_t seed = 0;
};

// Seeded synthetic corpus: length = min_len + Geometric(p), tokens uniform
// over [0, vocab), word_count = max(1, round(len * U(0.55, 0.95))). The word
// count correlates with the token count without reproducing its order.
std::vector<Sentence> generate_corpus(const CorpusConfig& cfg);

// JSON lines, one sentence per line:
//   {"id": 7, "tokens": [3, 1, 4], "word_count": 2}
std::string corpus_to_jsonl(const std::vector<Sentence>& corpus);
std::vector<Sentence> corpus_from_jsonl(const std::string& text);

enum class SortKey { None, Tokens, Words };
const char* sort_key_name(SortKey k);
SortKey sort_key_from_name(const std::string& s);

// Stable descending sort by the chosen key; None keeps input order.
void sort_sentences(std::vector<Sentence>& s, SortKey key);

// A padded slice of the corpus. padded is S32 of shape (ids.size(), max_len)
// with every row right-padded with token 0; padded_tokens == rows * max_len.
struct Batch {
  int64_t index = 0;
  std::vector<int64_t> ids;
  Tensor padded;
  int64_t max_len = 0;
  int64_t real_tokens = 0;
  int64_t padded_tokens = 0;

  // Row i as a (max_len, 1) S32 feed tensor.
  Tensor row_feed(size_t i) const;
};

// Consecutive slices of `sentences` in the given order, each padded to its
// own max token length. The last batch may be short.
std::vector<Batch> make_batches(const std::vector<Sentence>& sentences,
                                int64_t batch_size);

struct PaddingStats {
  int64_t real_tokens = 0;
  int64_t padded_tokens = 0;
  double waste_fraction = 0.0;  // (padded - real) / padded, 0 when empty
};
PaddingStats padding_stats(const std::vector<Batch>& batches);

// Single-producer multi-consumer FIFO: pop blocks until an item arrives or
// the queue is closed and drained, then returns nullopt.
class BatchQueue {
 public:
  void push(Batch b);
  void close();
  std::optional<Batch> pop();
  size_t enqueued() const { return enqueued_; }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Batch> q_;
  size_t enqueued_ = 0;
  bool closed_ = false;
};

// FNV-1a 64-bit, seeded so hashes can be folded incrementally.
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 14695981039346656037ULL);
uint64_t tensor_hash(const Tensor& t);

// Output map for one sentence, keyed like Executor::run results.
using SentenceOutputs = std::map<std::string, Tensor>;

struct RunStats {
  std::string config;  // "serial" or "parallel-w<N>"
  int64_t sentences = 0;
  int64_t batches = 0;
  int64_t real_tokens = 0;
  int64_t padded_tokens = 0;
  double wall_seconds = 0.0;
  std::vector<int64_t> per_worker_batches;
  uint64_t output_hash = 0;  // fold of per-sentence hashes in id order
};

struct RunResult {
  std::map<int64_t, SentenceOutputs> outputs;
  RunStats stats;
};

// Feeds each padded row through the graph's single S32 placeholder, one
// executor, batches in order. Executor errors abort with the batch index.
RunResult run_serial(const Graph& g, const std::vector<Batch>& batches);

// Same outputs, computed by `workers` threads pulling from a BatchQueue
// filled in decreasing max-token order. Each worker owns an executor over
// the shared graph; merged results are bit-identical to run_serial. A
// worker failure aborts with WorkerFailure naming worker and batch.
RunResult run_parallel(const Graph& g, const std::vector<Batch>& batches,
                       int workers);

// JSON lines {"id": n, "output_hash": "<16 hex digits>"} in id order.
std::string results_to_jsonl(const RunResult& r);

// Human-oriented JSON: one row per run with sentences/sec, padding waste,
// per-worker utilization, and the output hash for cross-run comparison.
std::string throughput_report(const std::vector<RunStats>& rows);

std::string hash_hex(uint64_t h);

}  // namespace qgraph
