// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "qgraph/kernels.hpp"
#include "qgraph/quant.hpp"

namespace qgraph {

std::string output_key(const std::string& node, int slot) {
  return node + ":" + std::to_string(slot);
}

namespace {

// Error messages are prefixed with the failing node; drop the code name the
// inner Error already baked into what() to avoid stuttering.
std::string strip_code(const Error& e) {
  std::string s = e.what();
  std::string code = std::string(errc_name(e.code())) + ": ";
  if (s.rfind(code, 0) == 0) return s.substr(code.size());
  return s;
}

Tensor slice_leading(const Tensor& t, int64_t index) {
  int64_t steps = t.dim(0);
  if (index < 0 || index >= steps) fail(Errc::IndexOutOfBounds, "per-step slice");
  Shape out_shape(t.shape().begin() + 1, t.shape().end());
  Tensor out = Tensor::zeros(t.dtype(), out_shape);
  size_t bytes = out.byte_size();
  std::memcpy(const_cast<void*>(out.raw_data()),
              static_cast<const char*>(t.raw_data()) + static_cast<size_t>(index) * bytes,
              bytes);
  return out;
}

Tensor stack_leading(const std::vector<Tensor>& parts) {
  const Tensor& first = parts.front();
  Shape out_shape;
  out_shape.push_back(static_cast<int64_t>(parts.size()));
  for (int64_t d : first.shape()) out_shape.push_back(d);
  Tensor out = Tensor::zeros(first.dtype(), out_shape);
  size_t bytes = first.byte_size();
  char* dst = const_cast<char*>(static_cast<const char*>(out.raw_data()));
  for (size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].dtype() != first.dtype() || parts[i].shape() != first.shape())
      fail(Errc::ShapeMismatch, "loop emissions change shape across steps");
    std::memcpy(dst + i * bytes, parts[i].raw_data(), bytes);
  }
  return out;
}

class Evaluator {
 public:
  Evaluator(const Graph& g, const std::vector<std::string>& order, const Feeds& feeds,
            const ExecOptions& opts, std::string prefix)
      : g_(g), order_(order), feeds_(feeds), opts_(opts), prefix_(std::move(prefix)) {}

  void run_all() {
    for (const std::string& id : order_) {
      const Node& n = g_.at(id);
      auto t0 = std::chrono::steady_clock::now();
      payload_bytes_ = 0;
      if (opts_.observer && *opts_.observer)
        for (size_t i = 0; i < n.inputs.size(); ++i)
          (*opts_.observer)(prefix_ + id, static_cast<int>(i), value(n.inputs[i]));
      try {
        vals_[id] = eval(n);
      } catch (const Error& e) {
        throw Error(e.code(), "node '" + prefix_ + id + "': " + strip_code(e));
      }
      if (opts_.trace) {
        auto t1 = std::chrono::steady_clock::now();
        TraceRecord r;
        r.node = prefix_ + id;
        r.kind = op_name(n.kind);
        r.micros = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
        r.payload_bytes = payload_bytes_;
        r.out_elems = vals_[id].empty() ? 0 : vals_[id][0].numel();
        opts_.trace->records.push_back(std::move(r));
      }
    }
  }

  const Tensor& value(const EdgeRef& e) const {
    return vals_.at(e.first).at(static_cast<size_t>(e.second));
  }

 private:
  float in_scalar(const Node& n, size_t i) const { return value(n.inputs[i]).scalar_f32(); }

  std::vector<Tensor> eval(const Node& n) {
    switch (n.kind) {
      case OpKind::Const: {
        if (n.has_attr("value")) return {n.attr_tensor("value")};
        auto it = feeds_.find(n.id);
        if (it == feeds_.end())
          fail(Errc::InvalidArgument, "placeholder has no feed");
        return {it->second};
      }
      case OpKind::MatMul: {
        const Tensor& a = value(n.inputs[0]);
        Tensor b = value(n.inputs[1]);
        if (n.attr_bool("transpose_b", false)) b = transpose2d(b);
        return {gemm_f32(a, b)};
      }
      case OpKind::QuantizedMatMul: return eval_qmatmul(n);
      case OpKind::QuantizeV2: return eval_quantize(n);
      case OpKind::Dequantize: return eval_dequantize(n);
      case OpKind::Requantize: {
        const Tensor& t = value(n.inputs[0]);
        double in_scale = scale_from_s32_range(in_scalar(n, 1), in_scalar(n, 2));
        auto [lo, hi] = ensure_u8_range(in_scalar(n, 3), in_scalar(n, 4));
        auto [q, p] = requantize(t, in_scale, lo, hi);
        (void)p;
        return {std::move(q), Tensor::scalar(static_cast<float>(lo)),
                Tensor::scalar(static_cast<float>(hi))};
      }
      case OpKind::RequantizationRange: {
        const Tensor& t = value(n.inputs[0]);
        double in_scale = scale_from_s32_range(in_scalar(n, 1), in_scalar(n, 2));
        auto [lo, hi] = requantization_range(t, in_scale);
        return {Tensor::scalar(static_cast<float>(lo)),
                Tensor::scalar(static_cast<float>(hi))};
      }
      case OpKind::MinOp:
      case OpKind::MaxOp: {
        auto in = value(n.inputs[0]).f32();
        if (in.empty()) fail(Errc::EmptyTensor, "reduction over empty tensor");
        float r = in[0];
        for (float v : in) r = n.kind == OpKind::MinOp ? std::min(r, v) : std::max(r, v);
        return {Tensor::scalar(r)};
      }
      case OpKind::Softmax: {
        int axis = n.has_attr("axis") ? static_cast<int>(n.attr_int("axis")) : -1;
        return {softmax(value(n.inputs[0]), axis)};
      }
      case OpKind::LayerNorm: {
        double eps = n.has_attr("eps") ? n.attr_real("eps") : 1e-5;
        return {layer_norm(value(n.inputs[0]), value(n.inputs[1]), value(n.inputs[2]), eps)};
      }
      case OpKind::GatherNd: {
        Tensor out = gather_nd(value(n.inputs[0]), value(n.inputs[1]), &payload_bytes_);
        return {std::move(out)};
      }
      case OpKind::QuantizedGatherNd: {
        Tensor out = gather_nd(value(n.inputs[0]), value(n.inputs[1]), &payload_bytes_);
        return {std::move(out), value(n.inputs[2]), value(n.inputs[3])};
      }
      case OpKind::Add: {
        const Tensor& a = value(n.inputs[0]);
        const Tensor& b = value(n.inputs[1]);
        if (a.shape() != b.shape())
          fail(Errc::ShapeMismatch,
               "Add operands " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
        auto pa = a.f32();
        auto pb = b.f32();
        std::vector<float> out(pa.size());
        for (size_t i = 0; i < pa.size(); ++i) out[i] = pa[i] + pb[i];
        return {Tensor::f32(a.shape(), std::move(out))};
      }
      case OpKind::Scale: {
        double f = n.attr_real("factor");
        auto in = value(n.inputs[0]).f32();
        std::vector<float> out(in.size());
        for (size_t i = 0; i < in.size(); ++i)
          out[i] = static_cast<float>(static_cast<double>(in[i]) * f);
        return {Tensor::f32(value(n.inputs[0]).shape(), std::move(out))};
      }
      case OpKind::Concat: return {eval_concat(n)};
      case OpKind::LoopRegion: return eval_loop(n);
    }
    fail(Errc::InvalidArgument, "unhandled op kind");
  }

  std::vector<Tensor> eval_qmatmul(const Node& n) {
    const Tensor& a = value(n.inputs[0]);
    Tensor b = value(n.inputs[1]);
    if (n.attr_bool("transpose_b", false)) b = transpose2d(b);
    double t_a = ensure_s8_threshold(in_scalar(n, 2), in_scalar(n, 3));
    QuantParams pa = compute_scale(-t_a, t_a, DType::S8);
    auto [blo, bhi] = ensure_u8_range(in_scalar(n, 4), in_scalar(n, 5));
    QuantParams pb = compute_scale(blo, bhi, DType::U8);

    GemmOffsets off;
    off.oa = 0;  // S8 side is symmetric
    off.ob = static_cast<int32_t>(std::llround(pb.zero_offset * pb.scale));
    Tensor c = gemm_s8u8s32(a, b, off);

    double combined = pa.scale * pb.scale;
    auto [mn, mx] = s32_range_for_scale(combined);
    return {std::move(c), Tensor::scalar(static_cast<float>(mn)),
            Tensor::scalar(static_cast<float>(mx))};
  }

  std::vector<Tensor> eval_quantize(const Node& n) {
    const Tensor& t = value(n.inputs[0]);
    double lo = in_scalar(n, 1), hi = in_scalar(n, 2);
    DType target = dtype_from_name(n.attr_str("target"));
    if (target == DType::S8) {
      double th = ensure_s8_threshold(lo, hi);
      QuantParams p = compute_scale(-th, th, DType::S8);
      return {quantize(t, p), Tensor::scalar(static_cast<float>(-th)),
              Tensor::scalar(static_cast<float>(th))};
    }
    auto [l, h] = ensure_u8_range(lo, hi);
    QuantParams p = compute_scale(l, h, DType::U8);
    return {quantize(t, p), Tensor::scalar(static_cast<float>(l)),
            Tensor::scalar(static_cast<float>(h))};
  }

  std::vector<Tensor> eval_dequantize(const Node& n) {
    const Tensor& t = value(n.inputs[0]);
    double lo = in_scalar(n, 1), hi = in_scalar(n, 2);
    switch (t.dtype()) {
      case DType::S8: {
        double th = ensure_s8_threshold(lo, hi);
        return {dequantize(t, compute_scale(-th, th, DType::S8))};
      }
      case DType::U8: {
        auto [l, h] = ensure_u8_range(lo, hi);
        return {dequantize(t, compute_scale(l, h, DType::U8))};
      }
      case DType::S32: {
        QuantParams p;
        p.target = DType::S32;
        p.scale = scale_from_s32_range(lo, hi);
        return {dequantize(t, p)};
      }
      default:
        fail(Errc::ShapeMismatch, "Dequantize input must be quantized");
    }
  }

  Tensor eval_concat(const Node& n) {
    if (n.inputs.empty()) fail(Errc::ShapeMismatch, "Concat of nothing");
    std::vector<const Tensor*> parts;
    for (const auto& e : n.inputs) parts.push_back(&value(e));
    const Tensor& first = *parts[0];
    int rank = first.rank();
    int64_t raw_axis = n.attr_int("axis");
    int axis = raw_axis < 0 ? static_cast<int>(raw_axis) + rank : static_cast<int>(raw_axis);
    if (axis < 0 || axis >= rank)
      fail(Errc::ShapeMismatch, "Concat axis out of range");
    int64_t total_axis = 0;
    for (const Tensor* p : parts) {
      if (p->rank() != rank) fail(Errc::ShapeMismatch, "Concat rank mismatch");
      for (int i = 0; i < rank; ++i)
        if (i != axis && p->dim(static_cast<size_t>(i)) != first.dim(static_cast<size_t>(i)))
          fail(Errc::ShapeMismatch, "Concat extent mismatch off axis");
      total_axis += p->dim(static_cast<size_t>(axis));
    }
    Shape out_shape = first.shape();
    out_shape[static_cast<size_t>(axis)] = total_axis;
    Tensor out = Tensor::zeros(first.dtype(), out_shape);

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= first.dim(static_cast<size_t>(i));
    for (int i = axis + 1; i < rank; ++i) inner *= first.dim(static_cast<size_t>(i));
    size_t esize = dtype_size(first.dtype());
    char* dst = const_cast<char*>(static_cast<const char*>(out.raw_data()));
    int64_t dst_row = total_axis * inner;
    int64_t axis_off = 0;
    for (const Tensor* p : parts) {
      int64_t ext = p->dim(static_cast<size_t>(axis));
      const char* src = static_cast<const char*>(p->raw_data());
      for (int64_t o = 0; o < outer; ++o)
        std::memcpy(dst + static_cast<size_t>((o * dst_row + axis_off * inner)) * esize,
                    src + static_cast<size_t>(o * ext * inner) * esize,
                    static_cast<size_t>(ext * inner) * esize);
      axis_off += ext;
    }
    return out;
  }

  std::vector<Tensor> eval_loop(const Node& n) {
    int64_t steps = n.attr_int("steps");
    GraphRef body = n.attr_graph("body");
    const std::vector<std::string>& carried = n.attr_strs("carried");
    size_t k = carried.size();
    size_t emitted = body->outputs().size() - k;
    if (steps == 0 && emitted > 0)
      fail(Errc::InvalidArgument, "zero-step loop with per-step emissions");

    std::vector<std::pair<std::string, const Tensor*>> per_step;
    for (const auto& [key, val] : n.attrs)
      if (key.rfind(kPerStepPrefix, 0) == 0)
        per_step.push_back({key.substr(std::string(kPerStepPrefix).size()),
                            &std::get<Tensor>(val)});

    std::vector<Tensor> state;
    for (size_t i = 0; i < k; ++i) state.push_back(value(n.inputs[i]));
    std::vector<std::vector<Tensor>> emissions(emitted);

    std::vector<std::string> body_order = topo_order(*body);
    std::string body_prefix = prefix_ + n.id + "/";
    for (int64_t t = 0; t < steps; ++t) {
      Feeds body_feeds;
      for (size_t i = 0; i < k; ++i) body_feeds.emplace(carried[i], state[i]);
      for (const auto& [id, tensor] : per_step)
        body_feeds.emplace(id, slice_leading(*tensor, t));
      Evaluator inner(*body, body_order, body_feeds, opts_, body_prefix);
      inner.run_all();
      for (size_t i = 0; i < k; ++i) state[i] = inner.value(body->outputs()[i]);
      for (size_t e = 0; e < emitted; ++e)
        emissions[e].push_back(inner.value(body->outputs()[k + e]));
    }

    std::vector<Tensor> outs = std::move(state);
    for (size_t e = 0; e < emitted; ++e) outs.push_back(stack_leading(emissions[e]));
    return outs;
  }

  const Graph& g_;
  const std::vector<std::string>& order_;
  const Feeds& feeds_;
  const ExecOptions& opts_;
  std::string prefix_;
  std::map<std::string, std::vector<Tensor>> vals_;
  int64_t payload_bytes_ = 0;
};

}  // namespace

Executor::Executor(const Graph& g) : g_(g) {
  validate_or_throw(g);
  order_ = topo_order(g);
}

std::map<std::string, Tensor> Executor::run(const Feeds& feeds,
                                            const ExecOptions& opts) const {
  // Feeds must match the placeholder set exactly.
  for (const auto& [id, n] : g_.nodes()) {
    if (!n.is_placeholder()) continue;
    auto it = feeds.find(id);
    if (it == feeds.end())
      fail(Errc::InvalidArgument, "missing feed for placeholder '" + id + "'");
    DType want = dtype_from_name(n.attr_str("dtype"));
    if (it->second.dtype() != want)
      fail(Errc::InvalidArgument, "feed '" + id + "' is " +
                                      dtype_name(it->second.dtype()) + ", placeholder wants " +
                                      dtype_name(want));
  }
  for (const auto& [key, t] : feeds) {
    (void)t;
    if (!g_.has(key) || !g_.at(key).is_placeholder())
      fail(Errc::InvalidArgument, "feed '" + key + "' does not name a placeholder");
  }

  Evaluator ev(g_, order_, feeds, opts, "");
  ev.run_all();
  std::map<std::string, Tensor> out;
  for (const auto& e : g_.outputs()) out.emplace(output_key(e.first, e.second), ev.value(e));
  return out;
}

std::map<std::string, Tensor> execute(const Graph& g, const Feeds& feeds,
                                      const ExecOptions& opts) {
  return Executor(g).run(feeds, opts);
}

}  // namespace qgraph
