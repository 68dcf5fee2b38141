// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/quant.hpp"

#include <algorithm>
#include <cmath>

namespace qgraph {

std::pair<int64_t, int64_t> target_range(DType t) {
  switch (t) {
    case DType::S8: return {-127, 127};
    case DType::U8: return {0, 255};
    default: fail(Errc::InvalidArgument, "no clamp range for accumulator dtypes");
  }
}

QuantParams compute_scale(double min, double max, DType target) {
  if (!(max > min))
    fail(Errc::DegenerateRange, "need max > min, got [" + std::to_string(min) +
                                    ", " + std::to_string(max) + "]");
  if (target == DType::S8 && min != -max)
    fail(Errc::AsymmetricSignedRange,
         "S8 range must satisfy min == -max, got [" + std::to_string(min) +
             ", " + std::to_string(max) + "]");
  QuantParams p;
  p.min = min;
  p.max = max;
  p.target = target;
  p.scale = target_levels(target) / (max - min);
  p.zero_offset = (target == DType::S8) ? 0.0 : min;
  return p;
}

namespace {
// Half away from zero, the rounding rule used everywhere in this library.
inline int64_t round_half_away(double v) { return std::llround(v); }
}  // namespace

int64_t quantize_value(double x, const QuantParams& p) {
  auto [lo, hi] = target_range(p.target);
  int64_t q = round_half_away((x - p.zero_offset) * p.scale);
  return std::clamp(q, lo, hi);
}

double dequantize_value(double q, const QuantParams& p) {
  return q / p.scale + p.zero_offset;
}

Tensor quantize(const Tensor& t, const QuantParams& p) {
  if (t.dtype() != DType::F32)
    fail(Errc::ShapeMismatch, "quantize input must be F32");
  auto in = t.f32();
  if (p.target == DType::S8) {
    std::vector<int8_t> out(in.size());
    for (size_t i = 0; i < in.size(); ++i)
      out[i] = static_cast<int8_t>(quantize_value(in[i], p));
    return Tensor::s8(t.shape(), std::move(out));
  }
  std::vector<uint8_t> out(in.size());
  for (size_t i = 0; i < in.size(); ++i)
    out[i] = static_cast<uint8_t>(quantize_value(in[i], p));
  return Tensor::u8(t.shape(), std::move(out));
}

Tensor dequantize(const Tensor& t, const QuantParams& p) {
  std::vector<float> out(static_cast<size_t>(t.numel()));
  switch (t.dtype()) {
    case DType::S8: {
      if (p.target != DType::S8) fail(Errc::ShapeMismatch, "params are not S8");
      auto in = t.s8();
      for (size_t i = 0; i < in.size(); ++i)
        out[i] = static_cast<float>(dequantize_value(in[i], p));
      break;
    }
    case DType::U8: {
      if (p.target != DType::U8) fail(Errc::ShapeMismatch, "params are not U8");
      auto in = t.u8();
      for (size_t i = 0; i < in.size(); ++i)
        out[i] = static_cast<float>(dequantize_value(in[i], p));
      break;
    }
    case DType::S32: {
      // Combined-scale accumulator: zero_offset plays no role.
      if (p.target != DType::S32)
        fail(Errc::ShapeMismatch, "S32 input needs combined-scale params");
      auto in = t.s32();
      for (size_t i = 0; i < in.size(); ++i)
        out[i] = static_cast<float>(static_cast<double>(in[i]) / p.scale);
      break;
    }
    default:
      fail(Errc::ShapeMismatch, "dequantize input must be quantized");
  }
  return Tensor::f32(t.shape(), std::move(out));
}

std::pair<Tensor, QuantParams> requantize(const Tensor& t, double in_scale,
                                          double out_min, double out_max) {
  if (t.dtype() != DType::S32)
    fail(Errc::ShapeMismatch, "requantize input must be S32");
  QuantParams p = compute_scale(out_min, out_max, DType::U8);
  auto in = t.s32();
  std::vector<uint8_t> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    double v = static_cast<double>(in[i]) / in_scale;
    out[i] = static_cast<uint8_t>(quantize_value(v, p));
  }
  return {Tensor::u8(t.shape(), std::move(out)), p};
}

std::pair<double, double> requantization_range(const Tensor& t, double in_scale) {
  if (t.dtype() != DType::S32)
    fail(Errc::ShapeMismatch, "requantization_range input must be S32");
  auto in = t.s32();
  if (in.empty()) fail(Errc::EmptyTensor, "requantization_range of empty tensor");
  int32_t lo = in[0], hi = in[0];
  for (int32_t v : in) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double min = static_cast<double>(lo) / in_scale;
  double max = static_cast<double>(hi) / in_scale;
  return {std::min(min, 0.0), std::max(max, 0.0)};
}

std::pair<double, double> s32_range_for_scale(double combined) {
  return {-2147483648.0 / combined, 2147483647.0 / combined};
}

double scale_from_s32_range(double min, double max) {
  if (!(max > min)) fail(Errc::DegenerateRange, "S32 range pair degenerate");
  return 4294967295.0 / (max - min);
}

std::pair<double, double> ensure_u8_range(double lo, double hi) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (!(hi > lo)) hi = lo + 1.0;  // all-zero data; any scale maps 0 -> offset
  return {lo, hi};
}

double ensure_s8_threshold(double lo, double hi) {
  double t = std::max(std::abs(lo), std::abs(hi));
  return t > 0.0 ? t : 1.0;
}

}  // namespace qgraph
