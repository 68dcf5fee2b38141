// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qgraph/dtype.hpp"
#include "qgraph/error.hpp"

namespace qgraph {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense n-d array. Scalars use an empty shape (numel 1). Equality is
// bitwise on the payload so tests can assert bit-identical results.
class Tensor {
 public:
  Tensor() : dtype_(DType::F32), shape_{0}, data_(std::vector<float>{}) {}

  static Tensor f32(Shape shape, std::vector<float> data);
  static Tensor s8(Shape shape, std::vector<int8_t> data);
  static Tensor u8(Shape shape, std::vector<uint8_t> data);
  static Tensor s32(Shape shape, std::vector<int32_t> data);
  static Tensor zeros(DType dtype, Shape shape);
  static Tensor scalar(float v) { return f32({}, {v}); }
  static Tensor scalar_s32(int32_t v) { return s32({}, {v}); }

  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  int64_t numel() const { return shape_numel(shape_); }
  size_t byte_size() const { return static_cast<size_t>(numel()) * dtype_size(dtype_); }
  int64_t dim(size_t i) const;
  int rank() const { return static_cast<int>(shape_.size()); }

  std::span<const float> f32() const { return span_of<float>(DType::F32); }
  std::span<const int8_t> s8() const { return span_of<int8_t>(DType::S8); }
  std::span<const uint8_t> u8() const { return span_of<uint8_t>(DType::U8); }
  std::span<const int32_t> s32() const { return span_of<int32_t>(DType::S32); }
  std::span<float> f32_mut() { return mut_span_of<float>(DType::F32); }
  std::span<int8_t> s8_mut() { return mut_span_of<int8_t>(DType::S8); }
  std::span<uint8_t> u8_mut() { return mut_span_of<uint8_t>(DType::U8); }
  std::span<int32_t> s32_mut() { return mut_span_of<int32_t>(DType::S32); }

  // Scalar convenience for rank-0/1-element tensors.
  float scalar_f32() const;
  int32_t scalar_s32_value() const;

  const void* raw_data() const;

  bool operator==(const Tensor& other) const;
  bool operator!=(const Tensor& other) const { return !(*this == other); }

 private:
  template <typename T>
  std::span<const T> span_of(DType want) const {
    if (dtype_ != want)
      fail(Errc::ShapeMismatch, std::string("tensor is ") + dtype_name(dtype_) +
                                    ", not " + dtype_name(want));
    return std::span<const T>(std::get<std::vector<T>>(data_));
  }
  template <typename T>
  std::span<T> mut_span_of(DType want) {
    if (dtype_ != want)
      fail(Errc::ShapeMismatch, std::string("tensor is ") + dtype_name(dtype_) +
                                    ", not " + dtype_name(want));
    return std::span<T>(std::get<std::vector<T>>(data_));
  }

  Tensor(DType dtype, Shape shape,
         std::variant<std::vector<float>, std::vector<int8_t>,
                      std::vector<uint8_t>, std::vector<int32_t>>
             data)
      : dtype_(dtype), shape_(std::move(shape)), data_(std::move(data)) {}

  DType dtype_;
  Shape shape_;
  std::variant<std::vector<float>, std::vector<int8_t>, std::vector<uint8_t>,
               std::vector<int32_t>>
      data_;
};

}  // namespace qgraph
