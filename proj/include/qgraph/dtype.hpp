// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "qgraph/error.hpp"

namespace qgraph {

enum class DType : uint8_t { F32, S8, U8, S32 };

inline size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::S8: return 1;
    case DType::U8: return 1;
    case DType::S32: return 4;
  }
  return 0;
}

inline const char* dtype_name(DType t) {
  switch (t) {
    case DType::F32: return "F32";
    case DType::S8: return "S8";
    case DType::U8: return "U8";
    case DType::S32: return "S32";
  }
  return "?";
}

inline DType dtype_from_name(const std::string& s) {
  if (s == "F32") return DType::F32;
  if (s == "S8") return DType::S8;
  if (s == "U8") return DType::U8;
  if (s == "S32") return DType::S32;
  fail(Errc::SchemaError, "unknown dtype '" + s + "'");
}

}  // namespace qgraph
