// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qgraph {

// Every failure the library can raise, used by tests and by the CLI's
// exit-code mapping. One enum instead of an exception zoo so call sites
// can switch on the kind.
enum class Errc {
  DegenerateRange,        // max <= min where a real range is required
  AsymmetricSignedRange,  // S8 params with min != -max
  EmptyTensor,
  ShapeMismatch,
  IndexOutOfBounds,
  CycleDetected,
  SchemaError,
  UnknownTap,
  EmptyHistogram,
  SupportMismatch,
  InsufficientMass,
  MissingTapEntry,
  WorkerFailure,
  IoError,
  InvalidArgument,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::DegenerateRange: return "DegenerateRange";
    case Errc::AsymmetricSignedRange: return "AsymmetricSignedRange";
    case Errc::EmptyTensor: return "EmptyTensor";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::IndexOutOfBounds: return "IndexOutOfBounds";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::SchemaError: return "SchemaError";
    case Errc::UnknownTap: return "UnknownTap";
    case Errc::EmptyHistogram: return "EmptyHistogram";
    case Errc::SupportMismatch: return "SupportMismatch";
    case Errc::InsufficientMass: return "InsufficientMass";
    case Errc::MissingTapEntry: return "MissingTapEntry";
    case Errc::WorkerFailure: return "WorkerFailure";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

}  // namespace qgraph
