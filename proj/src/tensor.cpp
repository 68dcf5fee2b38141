// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/tensor.hpp"

#include <cstring>
#include <sstream>

namespace qgraph {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) fail(Errc::ShapeMismatch, "negative extent in " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

namespace {
void check_size(const Shape& shape, size_t got) {
  int64_t want = shape_numel(shape);
  if (static_cast<int64_t>(got) != want)
    fail(Errc::ShapeMismatch, "shape " + shape_str(shape) + " wants " +
                                  std::to_string(want) + " elements, got " +
                                  std::to_string(got));
}
}  // namespace

Tensor Tensor::f32(Shape shape, std::vector<float> data) {
  check_size(shape, data.size());
  return Tensor(DType::F32, std::move(shape), std::move(data));
}
Tensor Tensor::s8(Shape shape, std::vector<int8_t> data) {
  check_size(shape, data.size());
  return Tensor(DType::S8, std::move(shape), std::move(data));
}
Tensor Tensor::u8(Shape shape, std::vector<uint8_t> data) {
  check_size(shape, data.size());
  return Tensor(DType::U8, std::move(shape), std::move(data));
}
Tensor Tensor::s32(Shape shape, std::vector<int32_t> data) {
  check_size(shape, data.size());
  return Tensor(DType::S32, std::move(shape), std::move(data));
}

Tensor Tensor::zeros(DType dtype, Shape shape) {
  size_t n = static_cast<size_t>(shape_numel(shape));
  switch (dtype) {
    case DType::F32: return Tensor(dtype, std::move(shape), std::vector<float>(n, 0.0f));
    case DType::S8: return Tensor(dtype, std::move(shape), std::vector<int8_t>(n, 0));
    case DType::U8: return Tensor(dtype, std::move(shape), std::vector<uint8_t>(n, 0));
    case DType::S32: return Tensor(dtype, std::move(shape), std::vector<int32_t>(n, 0));
  }
  fail(Errc::InvalidArgument, "bad dtype");
}

int64_t Tensor::dim(size_t i) const {
  if (i >= shape_.size())
    fail(Errc::ShapeMismatch, "dim " + std::to_string(i) + " of rank-" +
                                  std::to_string(shape_.size()) + " tensor");
  return shape_[i];
}

float Tensor::scalar_f32() const {
  if (numel() != 1) fail(Errc::ShapeMismatch, "not a scalar: " + shape_str(shape_));
  return f32()[0];
}

int32_t Tensor::scalar_s32_value() const {
  if (numel() != 1) fail(Errc::ShapeMismatch, "not a scalar: " + shape_str(shape_));
  return s32()[0];
}

const void* Tensor::raw_data() const {
  switch (dtype_) {
    case DType::F32: return std::get<std::vector<float>>(data_).data();
    case DType::S8: return std::get<std::vector<int8_t>>(data_).data();
    case DType::U8: return std::get<std::vector<uint8_t>>(data_).data();
    case DType::S32: return std::get<std::vector<int32_t>>(data_).data();
  }
  return nullptr;
}

bool Tensor::operator==(const Tensor& other) const {
  if (dtype_ != other.dtype_ || shape_ != other.shape_) return false;
  size_t n = byte_size();
  if (n == 0) return true;
  return std::memcmp(raw_data(), other.raw_data(), n) == 0;
}

}  // namespace qgraph
