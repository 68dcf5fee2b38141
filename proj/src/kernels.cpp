// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace qgraph {

namespace {

void check_matmul_shapes(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    fail(Errc::ShapeMismatch, "matmul needs rank-2 operands, got " +
                                  shape_str(a.shape()) + " x " + shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    fail(Errc::ShapeMismatch, "matmul inner extents differ: " +
                                  shape_str(a.shape()) + " x " + shape_str(b.shape()));
}

}  // namespace

Tensor gemm_f32(const Tensor& a, const Tensor& b) {
  check_matmul_shapes(a, b);
  if (a.dtype() != DType::F32 || b.dtype() != DType::F32)
    fail(Errc::ShapeMismatch, "gemm_f32 operands must be F32");
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto pa = a.f32();
  auto pb = b.f32();
  std::vector<float> out(static_cast<size_t>(m * n), 0.0f);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (int64_t p = 0; p < k; ++p)
        acc += pa[i * k + p] * pb[p * n + j];
      out[static_cast<size_t>(i * n + j)] = acc;
    }
  }
  return Tensor::f32({m, n}, std::move(out));
}

Tensor gemm_s8u8s32(const Tensor& a, const Tensor& b, const GemmOffsets& off,
                    const Tensor* c_in) {
  check_matmul_shapes(a, b);
  if (a.dtype() != DType::S8 || b.dtype() != DType::U8)
    fail(Errc::ShapeMismatch, "gemm_s8u8s32 wants S8 x U8 operands");
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (k > 8192)
    fail(Errc::ShapeMismatch, "inner extent " + std::to_string(k) +
                                  " exceeds the S32 accumulation bound (8192)");
  if (c_in) {
    if (c_in->dtype() != DType::S32)
      fail(Errc::ShapeMismatch, "C input must be S32");
    if (c_in->shape() != Shape{m, n})
      fail(Errc::ShapeMismatch, "C input shape " + shape_str(c_in->shape()) +
                                    " != " + shape_str(Shape{m, n}));
  }
  auto pa = a.s8();
  auto pb = b.u8();

  // Row sums of A and column sums of B feed the offset correction terms.
  std::vector<int32_t> rowsum(static_cast<size_t>(m), 0);
  for (int64_t i = 0; i < m; ++i) {
    int32_t s = 0;
    for (int64_t p = 0; p < k; ++p) s += pa[i * k + p];
    rowsum[static_cast<size_t>(i)] = s;
  }
  std::vector<int32_t> colsum(static_cast<size_t>(n), 0);
  for (int64_t p = 0; p < k; ++p)
    for (int64_t j = 0; j < n; ++j) colsum[static_cast<size_t>(j)] += pb[p * n + j];

  const int32_t kk = static_cast<int32_t>(k);
  const int32_t cross = kk * off.oa * off.ob;
  std::vector<int32_t> out(static_cast<size_t>(m * n), 0);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      int32_t acc = 0;
      for (int64_t p = 0; p < k; ++p)
        acc += static_cast<int32_t>(pa[i * k + p]) * static_cast<int32_t>(pb[p * n + j]);
      acc += off.ob * rowsum[static_cast<size_t>(i)];
      acc += off.oa * colsum[static_cast<size_t>(j)];
      acc += cross;
      int32_t c = off.alpha * acc + off.oc;
      if (c_in) c += off.beta * c_in->s32()[static_cast<size_t>(i * n + j)];
      out[static_cast<size_t>(i * n + j)] = c;
    }
  }
  return Tensor::s32({m, n}, std::move(out));
}

namespace {

// Resolve an axis argument against a rank, negatives counting from the back.
int resolve_axis(int axis, int rank) {
  int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank)
    fail(Errc::ShapeMismatch, "axis " + std::to_string(axis) + " out of range for rank " +
                                  std::to_string(rank));
  return a;
}

}  // namespace

Tensor softmax(const Tensor& t, int axis) {
  if (t.dtype() != DType::F32) fail(Errc::ShapeMismatch, "softmax input must be F32");
  if (t.rank() == 0) return Tensor::f32({}, {1.0f});
  int ax = resolve_axis(axis, t.rank());
  const Shape& s = t.shape();
  int64_t inner = 1, outer = 1;
  for (int i = 0; i < ax; ++i) outer *= s[static_cast<size_t>(i)];
  for (int i = ax + 1; i < t.rank(); ++i) inner *= s[static_cast<size_t>(i)];
  int64_t extent = s[static_cast<size_t>(ax)];
  if (extent == 0) fail(Errc::EmptyTensor, "softmax along empty axis");

  auto in = t.f32();
  std::vector<float> out(in.size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t q = 0; q < inner; ++q) {
      int64_t base = o * extent * inner + q;
      double mx = in[static_cast<size_t>(base)];
      for (int64_t e = 1; e < extent; ++e)
        mx = std::max(mx, static_cast<double>(in[static_cast<size_t>(base + e * inner)]));
      double sum = 0.0;
      for (int64_t e = 0; e < extent; ++e)
        sum += std::exp(static_cast<double>(in[static_cast<size_t>(base + e * inner)]) - mx);
      for (int64_t e = 0; e < extent; ++e) {
        double v = std::exp(static_cast<double>(in[static_cast<size_t>(base + e * inner)]) - mx);
        out[static_cast<size_t>(base + e * inner)] = static_cast<float>(v / sum);
      }
    }
  }
  return Tensor::f32(t.shape(), std::move(out));
}

Tensor layer_norm(const Tensor& t, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (t.dtype() != DType::F32 || gamma.dtype() != DType::F32 ||
      beta.dtype() != DType::F32)
    fail(Errc::ShapeMismatch, "layer_norm operands must be F32");
  if (t.rank() < 1) fail(Errc::ShapeMismatch, "layer_norm needs rank >= 1");
  int64_t d = t.shape().back();
  if (d == 0) fail(Errc::EmptyTensor, "layer_norm along empty axis");
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
    fail(Errc::ShapeMismatch, "gamma/beta must be rank-1 of extent " + std::to_string(d));

  auto in = t.f32();
  auto g = gamma.f32();
  auto b = beta.f32();
  int64_t rows = t.numel() / d;
  std::vector<float> out(in.size());
  for (int64_t r = 0; r < rows; ++r) {
    const float* row = in.data() + r * d;
    double mean = 0.0;
    for (int64_t i = 0; i < d; ++i) mean += row[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t i = 0; i < d; ++i) {
      double c = row[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    for (int64_t i = 0; i < d; ++i)
      out[static_cast<size_t>(r * d + i)] =
          static_cast<float>((row[i] - mean) * inv * g[i] + b[i]);
  }
  return Tensor::f32(t.shape(), std::move(out));
}

Tensor gather_nd(const Tensor& params, const Tensor& indices, int64_t* payload_bytes) {
  if (indices.dtype() != DType::S32)
    fail(Errc::ShapeMismatch, "gather_nd indices must be S32");
  if (indices.rank() < 1)
    fail(Errc::ShapeMismatch, "gather_nd indices need rank >= 1");
  int64_t depth = indices.shape().back();
  if (depth < 1 || depth > params.rank())
    fail(Errc::ShapeMismatch, "gather_nd index depth " + std::to_string(depth) +
                                  " vs params rank " + std::to_string(params.rank()));

  // One gathered slice spans the trailing params dims beyond the index depth.
  int64_t slice_elems = 1;
  for (int i = static_cast<int>(depth); i < params.rank(); ++i)
    slice_elems *= params.dim(static_cast<size_t>(i));
  Shape out_shape(indices.shape().begin(), indices.shape().end() - 1);
  for (int i = static_cast<int>(depth); i < params.rank(); ++i)
    out_shape.push_back(params.dim(static_cast<size_t>(i)));

  std::vector<int64_t> strides(static_cast<size_t>(depth));
  {
    int64_t acc = slice_elems;
    for (int64_t i = depth - 1; i >= 0; --i) {
      strides[static_cast<size_t>(i)] = acc;
      acc *= params.dim(static_cast<size_t>(i));
    }
  }

  auto idx = indices.s32();
  int64_t tuples = indices.numel() / depth;
  size_t esize = dtype_size(params.dtype());
  Tensor out = Tensor::zeros(params.dtype(), out_shape);
  const char* src = static_cast<const char*>(params.raw_data());
  char* dst = const_cast<char*>(static_cast<const char*>(out.raw_data()));

  for (int64_t u = 0; u < tuples; ++u) {
    int64_t off = 0;
    for (int64_t c = 0; c < depth; ++c) {
      int32_t v = idx[static_cast<size_t>(u * depth + c)];
      int64_t extent = params.dim(static_cast<size_t>(c));
      if (v < 0 || v >= extent)
        fail(Errc::IndexOutOfBounds, "index " + std::to_string(v) + " out of [0," +
                                         std::to_string(extent) + ") at tuple " +
                                         std::to_string(u) + " component " +
                                         std::to_string(c));
      off += v * strides[static_cast<size_t>(c)];
    }
    std::memcpy(dst + static_cast<size_t>(u * slice_elems) * esize,
                src + static_cast<size_t>(off) * esize,
                static_cast<size_t>(slice_elems) * esize);
  }
  if (payload_bytes)
    *payload_bytes = static_cast<int64_t>(out.numel()) * static_cast<int64_t>(esize);
  return out;
}

Tensor transpose2d(const Tensor& t) {
  if (t.rank() != 2) fail(Errc::ShapeMismatch, "transpose2d needs rank 2");
  int64_t r = t.dim(0), c = t.dim(1);
  size_t esize = dtype_size(t.dtype());
  Tensor out = Tensor::zeros(t.dtype(), {c, r});
  const char* src = static_cast<const char*>(t.raw_data());
  char* dst = const_cast<char*>(static_cast<const char*>(out.raw_data()));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j)
      std::memcpy(dst + static_cast<size_t>(j * r + i) * esize,
                  src + static_cast<size_t>(i * c + j) * esize, esize);
  return out;
}

}  // namespace qgraph
