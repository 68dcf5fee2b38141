// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0

#include "qgraph/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>
#include <utility>

#include <json.hpp>

#include "qgraph/error.hpp"

namespace qgraph {

using nlohmann::json;

namespace {

// Error::what() already carries the code name; strip it before re-wrapping
// so nested failures stay readable.
std::string strip_code(const Error& e) {
  std::string w = e.what();
  std::string p = std::string(errc_name(e.code())) + ": ";
  if (w.rfind(p, 0) == 0) w = w.substr(p.size());
  return w;
}

// The pipeline feeds token ids into the graph's single integer placeholder.
std::string token_placeholder(const Graph& g) {
  std::string found;
  for (const auto& [id, n] : g.nodes()) {
    if (!n.is_placeholder()) continue;
    if (n.attr_str("dtype") != "S32") continue;
    if (!found.empty())
      fail(Errc::InvalidArgument,
           "graph has multiple S32 placeholders ('" + found + "', '" + id + "')");
    found = id;
  }
  if (found.empty())
    fail(Errc::InvalidArgument, "graph has no S32 token placeholder");
  return found;
}

uint64_t fold_u64(uint64_t h, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  return fnv1a64(b, sizeof(b), h);
}

uint64_t sentence_hash(int64_t id, const SentenceOutputs& outs) {
  uint64_t h = fold_u64(14695981039346656037ULL, static_cast<uint64_t>(id));
  for (const auto& [key, t] : outs) {
    h = fnv1a64(key.data(), key.size(), h);
    h = fold_u64(h, tensor_hash(t));
  }
  return h;
}

struct HashedOutputs {
  std::map<int64_t, SentenceOutputs> outputs;

  // Throws on duplicate ids: a sentence must land in exactly one batch.
  void insert(int64_t id, SentenceOutputs outs) {
    if (!outputs.emplace(id, std::move(outs)).second)
      fail(Errc::InvalidArgument, "duplicate sentence id " + std::to_string(id));
  }

  uint64_t combined_hash() const {
    uint64_t h = 14695981039346656037ULL;
    for (const auto& [id, outs] : outputs) h = fold_u64(h, sentence_hash(id, outs));
    return h;
  }
};

// Executes every row of one batch; results appended to `sink`.
void run_batch(const Executor& ex, const std::string& feed_id, const Batch& b,
               std::vector<std::pair<int64_t, SentenceOutputs>>& sink) {
  for (size_t i = 0; i < b.ids.size(); ++i) {
    Feeds feeds;
    feeds.emplace(feed_id, b.row_feed(i));
    sink.emplace_back(b.ids[i], ex.run(feeds));
  }
}

void fill_stats(RunStats& st, const std::vector<Batch>& batches) {
  st.batches = static_cast<int64_t>(batches.size());
  for (const Batch& b : batches) {
    st.sentences += static_cast<int64_t>(b.ids.size());
    st.real_tokens += b.real_tokens;
    st.padded_tokens += b.padded_tokens;
  }
}

}  // namespace

std::vector<Sentence> generate_corpus(const CorpusConfig& cfg) {
  if (cfg.count < 0) fail(Errc::InvalidArgument, "corpus count must be >= 0");
  if (cfg.vocab < 1) fail(Errc::InvalidArgument, "vocab must be >= 1");
  if (cfg.min_len < 1) fail(Errc::InvalidArgument, "min_len must be >= 1");
  if (!(cfg.geometric_p > 0.0) || !(cfg.geometric_p < 1.0))
    fail(Errc::InvalidArgument, "geometric_p must lie in (0, 1)");

  Rng rng(cfg.seed);
  std::vector<Sentence> out;
  out.reserve(static_cast<size_t>(cfg.count));
  for (int64_t i = 0; i < cfg.count; ++i) {
    Sentence s;
    s.id = i;
    int64_t len = cfg.min_len + rng.geometric(cfg.geometric_p);
    s.tokens.resize(static_cast<size_t>(len));
    for (int32_t& t : s.tokens)
      t = static_cast<int32_t>(rng.uniform_int(0, cfg.vocab - 1));
    double frac = rng.uniform(0.55, 0.95);
    s.word_count = std::max<int64_t>(
        1, std::llround(static_cast<double>(len) * frac));
    out.push_back(std::move(s));
  }
  return out;
}

std::string corpus_to_jsonl(const std::vector<Sentence>& corpus) {
  std::string out;
  for (const Sentence& s : corpus) {
    json j;
    j["id"] = s.id;
    j["tokens"] = s.tokens;
    j["word_count"] = s.word_count;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Sentence> corpus_from_jsonl(const std::string& text) {
  std::vector<Sentence> out;
  size_t pos = 0;
  int64_t line_no = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::string where = "line " + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      fail(Errc::SchemaError, where + ": not a JSON object");
    if (!j.contains("id") || !j["id"].is_number_integer())
      fail(Errc::SchemaError, where + ": missing integer 'id'");
    if (!j.contains("tokens") || !j["tokens"].is_array())
      fail(Errc::SchemaError, where + ": missing array 'tokens'");
    if (!j.contains("word_count") || !j["word_count"].is_number_integer())
      fail(Errc::SchemaError, where + ": missing integer 'word_count'");

    Sentence s;
    s.id = j["id"].get<int64_t>();
    for (const auto& t : j["tokens"]) {
      if (!t.is_number_integer())
        fail(Errc::SchemaError, where + ": token is not an integer");
      s.tokens.push_back(t.get<int32_t>());
    }
    s.word_count = j["word_count"].get<int64_t>();
    if (s.tokens.empty())
      fail(Errc::SchemaError, where + ": sentence has no tokens");
    if (s.word_count < 1)
      fail(Errc::SchemaError, where + ": word_count must be >= 1");
    out.push_back(std::move(s));
  }
  return out;
}

const char* sort_key_name(SortKey k) {
  switch (k) {
    case SortKey::None: return "none";
    case SortKey::Tokens: return "tokens";
    case SortKey::Words: return "words";
  }
  return "none";
}

SortKey sort_key_from_name(const std::string& s) {
  if (s == "none") return SortKey::None;
  if (s == "tokens") return SortKey::Tokens;
  if (s == "words") return SortKey::Words;
  fail(Errc::InvalidArgument, "unknown sort key '" + s + "'");
}

void sort_sentences(std::vector<Sentence>& s, SortKey key) {
  if (key == SortKey::None) return;
  auto measure = [key](const Sentence& a) {
    return key == SortKey::Tokens ? static_cast<int64_t>(a.tokens.size())
                                  : a.word_count;
  };
  std::stable_sort(s.begin(), s.end(), [&](const Sentence& a, const Sentence& b) {
    return measure(a) > measure(b);
  });
}

Tensor Batch::row_feed(size_t i) const {
  auto all = padded.s32();
  size_t w = static_cast<size_t>(max_len);
  std::vector<int32_t> row(all.begin() + static_cast<int64_t>(i * w),
                           all.begin() + static_cast<int64_t>((i + 1) * w));
  return Tensor::s32({max_len, 1}, std::move(row));
}

std::vector<Batch> make_batches(const std::vector<Sentence>& sentences,
                                int64_t batch_size) {
  if (batch_size < 1) fail(Errc::InvalidArgument, "batch_size must be >= 1");
  std::vector<Batch> out;
  for (size_t start = 0; start < sentences.size();
       start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(sentences.size(), start + static_cast<size_t>(batch_size));
    Batch b;
    b.index = static_cast<int64_t>(out.size());
    for (size_t i = start; i < end; ++i) {
      b.ids.push_back(sentences[i].id);
      b.max_len = std::max<int64_t>(
          b.max_len, static_cast<int64_t>(sentences[i].tokens.size()));
      b.real_tokens += static_cast<int64_t>(sentences[i].tokens.size());
    }
    int64_t rows = static_cast<int64_t>(b.ids.size());
    std::vector<int32_t> data(static_cast<size_t>(rows * b.max_len), 0);
    for (size_t i = start; i < end; ++i) {
      const auto& toks = sentences[i].tokens;
      size_t base = (i - start) * static_cast<size_t>(b.max_len);
      std::copy(toks.begin(), toks.end(), data.begin() + static_cast<int64_t>(base));
    }
    b.padded = Tensor::s32({rows, b.max_len}, std::move(data));
    b.padded_tokens = rows * b.max_len;
    out.push_back(std::move(b));
  }
  return out;
}

PaddingStats padding_stats(const std::vector<Batch>& batches) {
  PaddingStats st;
  for (const Batch& b : batches) {
    st.real_tokens += b.real_tokens;
    st.padded_tokens += b.padded_tokens;
  }
  if (st.padded_tokens > 0)
    st.waste_fraction = static_cast<double>(st.padded_tokens - st.real_tokens) /
                        static_cast<double>(st.padded_tokens);
  return st;
}

void BatchQueue::push(Batch b) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (closed_) fail(Errc::InvalidArgument, "push on closed queue");
    q_.push_back(std::move(b));
    ++enqueued_;
  }
  cv_.notify_one();
}

void BatchQueue::close() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<Batch> BatchQueue::pop() {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [this] { return !q_.empty() || closed_; });
  if (q_.empty()) return std::nullopt;
  Batch b = std::move(q_.front());
  q_.pop_front();
  return b;
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t tensor_hash(const Tensor& t) {
  uint64_t h = 14695981039346656037ULL;
  unsigned char kind = static_cast<unsigned char>(t.dtype());
  h = fnv1a64(&kind, 1, h);
  h = fold_u64(h, static_cast<uint64_t>(t.rank()));
  for (int64_t d : t.shape()) h = fold_u64(h, static_cast<uint64_t>(d));
  if (t.numel() > 0) h = fnv1a64(t.raw_data(), t.byte_size(), h);
  return h;
}

RunResult run_serial(const Graph& g, const std::vector<Batch>& batches) {
  auto t0 = std::chrono::steady_clock::now();
  std::string feed_id = token_placeholder(g);
  Executor ex(g);

  HashedOutputs acc;
  int64_t done = 0;
  for (const Batch& b : batches) {
    std::vector<std::pair<int64_t, SentenceOutputs>> sink;
    try {
      run_batch(ex, feed_id, b, sink);
    } catch (const Error& e) {
      fail(e.code(), "batch " + std::to_string(b.index) + ": " + strip_code(e));
    }
    for (auto& [id, outs] : sink) acc.insert(id, std::move(outs));
    ++done;
  }

  RunResult r;
  r.outputs = std::move(acc.outputs);
  r.stats.config = "serial";
  fill_stats(r.stats, batches);
  r.stats.per_worker_batches = {done};
  r.stats.output_hash = HashedOutputs{r.outputs}.combined_hash();
  r.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

RunResult run_parallel(const Graph& g, const std::vector<Batch>& batches,
                       int workers) {
  if (workers < 1) fail(Errc::InvalidArgument, "workers must be >= 1");
  auto t0 = std::chrono::steady_clock::now();
  std::string feed_id = token_placeholder(g);

  // Scheduling order: longest batches first, original order on ties. The
  // merged result is order-independent so this only shapes load balance.
  std::vector<const Batch*> order;
  order.reserve(batches.size());
  for (const Batch& b : batches) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(),
                   [](const Batch* a, const Batch* b) { return a->max_len > b->max_len; });

  BatchQueue queue;
  for (const Batch* b : order) queue.push(*b);
  queue.close();

  struct Failure {
    int worker = 0;
    int64_t batch = 0;
    std::string message;
  };
  std::mutex merge_mu;
  std::vector<std::pair<int64_t, SentenceOutputs>> merged;
  std::vector<int64_t> per_worker(static_cast<size_t>(workers), 0);
  std::optional<Failure> failure;
  std::atomic<bool> failed{false};

  auto work = [&](int w) {
    std::vector<std::pair<int64_t, SentenceOutputs>> local;
    int64_t local_batches = 0;
    int64_t current = -1;
    try {
      Executor ex(g);
      while (auto b = queue.pop()) {
        if (failed.load()) continue;  // drain without computing
        current = b->index;
        run_batch(ex, feed_id, *b, local);
        ++local_batches;
      }
    } catch (const Error& e) {
      failed.store(true);
      std::lock_guard<std::mutex> lock(merge_mu);
      // Keep the failure from the lowest batch index for a stable message.
      Failure f{w, current, strip_code(e)};
      if (!failure || f.batch < failure->batch) failure = f;
      return;
    }
    std::lock_guard<std::mutex> lock(merge_mu);
    per_worker[static_cast<size_t>(w)] = local_batches;
    for (auto& item : local) merged.push_back(std::move(item));
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
  for (auto& t : pool) t.join();

  if (failure) {
    std::string where = failure->batch < 0
                            ? " failed during setup: "
                            : " failed on batch " + std::to_string(failure->batch) + ": ";
    fail(Errc::WorkerFailure,
         "worker " + std::to_string(failure->worker) + where + failure->message);
  }

  HashedOutputs acc;
  for (auto& [id, outs] : merged) acc.insert(id, std::move(outs));

  RunResult r;
  r.outputs = std::move(acc.outputs);
  r.stats.config = "parallel-w" + std::to_string(workers);
  fill_stats(r.stats, batches);
  r.stats.per_worker_batches = std::move(per_worker);
  r.stats.output_hash = HashedOutputs{r.outputs}.combined_hash();
  r.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string results_to_jsonl(const RunResult& r) {
  std::string out;
  for (const auto& [id, outs] : r.outputs) {
    json j;
    j["id"] = id;
    j["output_hash"] = hash_hex(sentence_hash(id, outs));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string throughput_report(const std::vector<RunStats>& rows) {
  json runs = json::array();
  for (const RunStats& st : rows) {
    json j;
    j["config"] = st.config;
    j["sentences"] = st.sentences;
    j["batches"] = st.batches;
    j["real_tokens"] = st.real_tokens;
    j["padded_tokens"] = st.padded_tokens;
    j["padding_waste_pct"] =
        st.padded_tokens > 0
            ? 100.0 * static_cast<double>(st.padded_tokens - st.real_tokens) /
                  static_cast<double>(st.padded_tokens)
            : 0.0;
    j["wall_seconds"] = st.wall_seconds;
    j["sentences_per_sec"] =
        st.wall_seconds > 0.0 ? static_cast<double>(st.sentences) / st.wall_seconds
                              : 0.0;
    j["per_worker_batches"] = st.per_worker_batches;
    json util = json::array();
    for (int64_t c : st.per_worker_batches)
      util.push_back(st.batches > 0
                         ? static_cast<double>(c) / static_cast<double>(st.batches)
                         : 0.0);
    j["worker_utilization"] = util;
    j["output_hash"] = hash_hex(st.output_hash);
    runs.push_back(std::move(j));
  }
  json root;
  root["runs"] = std::move(runs);
  return root.dump(2) + "\n";
}

}  // namespace qgraph
