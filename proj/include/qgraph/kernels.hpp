// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "qgraph/tensor.hpp"

namespace qgraph {

// Scalar controls of the offset GEMM:
//   C = alpha * (A + oa)(B + ob) + beta * C_in + oc
// with A: S8 (m,k), B: U8 (k,n), all accumulation in S32.
struct GemmOffsets {
  int32_t alpha = 1;
  int32_t beta = 0;
  int32_t oa = 0;  // added to every A element
  int32_t ob = 0;  // added to every B element
  int32_t oc = 0;  // added to every C element
};

// Plain FP32 GEMM, C = A(m,k) * B(k,n), fixed row-major accumulation order.
Tensor gemm_f32(const Tensor& a, const Tensor& b);

// Offset GEMM evaluated by algebraic expansion:
//   (A + oa)(B + ob) = A*B + ob*rowsum(A)*1^T + oa*1*colsum(B) + k*oa*ob
// Bit-identical to the direct (A+oa)(B+ob) triple loop for any integer
// offsets within the documented bound; asserts k <= 8192 so the S32
// accumulator cannot wrap.
Tensor gemm_s8u8s32(const Tensor& a, const Tensor& b, const GemmOffsets& off,
                    const Tensor* c_in = nullptr);

// Numerically stable softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& t, int axis = -1);

// Last-axis layer normalization with affine gamma/beta (rank-1, matching the
// last extent). Population variance, epsilon inside the square root.
Tensor layer_norm(const Tensor& t, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// N-d gather: out[i...] = params[indices[i...], ...]. indices is S32 with
// last extent d <= rank(params); output shape is
// indices.shape[:-1] + params.shape[d:]. Works for every dtype.
// If payload_bytes is non-null it receives the exact number of payload bytes
// copied out of params (output element count times element size).
Tensor gather_nd(const Tensor& params, const Tensor& indices,
                 int64_t* payload_bytes = nullptr);

// (n,k) -> (k,n) copies used by the matmul transpose_b attribute.
Tensor transpose2d(const Tensor& t);

}  // namespace qgraph
