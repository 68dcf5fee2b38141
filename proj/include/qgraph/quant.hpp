// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

#include "qgraph/tensor.hpp"

namespace qgraph {

// Affine quantization parameters for one tensor.
//
// scale maps value units to quantized units: q = round((x - zero_offset) * scale).
// S8 is symmetric: 254 levels over [-127,127], zero_offset == 0, min == -max.
// U8 is affine:    255 levels over [0,255],    zero_offset == min.
// The S32 target never comes from compute_scale; executor code builds it
// directly to describe a matmul accumulator with a combined scale.
struct QuantParams {
  double min = 0.0;
  double max = 0.0;
  double scale = 0.0;        // quantized units per value unit
  double zero_offset = 0.0;  // value units
  DType target = DType::U8;
};

// Number of representable levels backing the scale for each target.
inline double target_levels(DType t) {
  switch (t) {
    case DType::S8: return 254.0;  // [-127,127], zero exact
    case DType::U8: return 255.0;  // [0,255]
    default: fail(Errc::InvalidArgument, "no level count for accumulator dtypes");
  }
}

// Integer clamp range for a quantization target.
std::pair<int64_t, int64_t> target_range(DType t);

// Derive params from an observed range. S8 demands min == -max.
QuantParams compute_scale(double min, double max, DType target);

// Scalar paths. These are the defining arithmetic (double); the tensor ops
// apply them elementwise and store the results at tensor precision.
int64_t quantize_value(double x, const QuantParams& p);
double dequantize_value(double q, const QuantParams& p);

// Elementwise quantize of an F32 tensor to p.target. Out-of-range saturates.
Tensor quantize(const Tensor& t, const QuantParams& p);

// Elementwise inverse map q -> q/scale + zero_offset. Accepts a tensor whose
// dtype matches p.target, or an S32 tensor with p carrying a combined scale.
Tensor dequantize(const Tensor& t, const QuantParams& p);

// S32 accumulator -> U8 under a freshly derived [out_min,out_max] range.
// Returns the tensor and the params actually used.
std::pair<Tensor, QuantParams> requantize(const Tensor& t, double in_scale,
                                          double out_min, double out_max);

// Value-unit extrema of an S32 accumulator, widened to include zero so a
// downstream U8 range always brackets the offset.
std::pair<double, double> requantization_range(const Tensor& t, double in_scale);

// The (min,max) pair describing an S32 accumulator whose combined scale is
// `combined`: full S32 range expressed in value units.
std::pair<double, double> s32_range_for_scale(double combined);
double scale_from_s32_range(double min, double max);

// Widen a raw observed range so it brackets zero and is non-degenerate.
// Used where graph data (not the caller) supplies the range.
std::pair<double, double> ensure_u8_range(double lo, double hi);
// Symmetric threshold for an S8 side: max(|lo|,|hi|), nudged if zero.
double ensure_s8_threshold(double lo, double hi);

}  // namespace qgraph
