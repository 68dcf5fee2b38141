// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qgraph/executor.hpp"
#include "qgraph/graph.hpp"

namespace qgraph {

// Fixed-range activation histogram. Bin edges are frozen at construction
// (collection computes global extrema in a first pass), so counts from
// several feeds accumulate into directly comparable bins.
class Histogram {
 public:
  static constexpr int kBins = 2048;
  static constexpr double kZeroEps = 1e-12;

  // Range is widened so it always contains zero; lo == hi collapses to a
  // one-value histogram whose samples all land in bin 0.
  Histogram(double lo, double hi);

  void add(double x);
  void add_all(const Tensor& t);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<int64_t>& counts() const { return counts_; }
  int64_t total() const { return total_; }
  int64_t zero_count() const { return zero_count_; }
  int64_t neg_count() const { return neg_count_; }
  int64_t pos_count() const { return pos_count_; }
  double observed_min() const { return observed_min_; }
  double observed_max() const { return observed_max_; }

  // Fraction of bins holding at least one sample.
  double occupancy() const;

 private:
  double lo_, hi_;
  std::vector<int64_t> counts_;
  int64_t total_ = 0;
  int64_t zero_count_ = 0;  // |x| <= kZeroEps
  int64_t neg_count_ = 0;   // x < -kZeroEps
  int64_t pos_count_ = 0;   // x > +kZeroEps
  double observed_min_ = 0.0;
  double observed_max_ = 0.0;
  bool saw_any_ = false;
};

enum class DistClass { Sparse, Narrow, Gaussian };
const char* dist_class_name(DistClass c);
DistClass dist_class_from_name(const std::string& s);

enum class CalibMode { Symmetric, Independent, Conjugate };
const char* calib_mode_name(CalibMode m);
CalibMode calib_mode_from_name(const std::string& s);

struct ThresholdPair {
  double t_min = 0.0;
  double t_max = 0.0;
};

struct ClassifyConfig {
  double sparse_zero_fraction = 0.90;  // zero_count/total at or above -> Sparse
  double narrow_occupancy = 0.05;      // occupied-bin fraction at or below -> Narrow
};

// Buckets a histogram into one of the three activation shapes.
DistClass classify_distribution(const Histogram& h,
                                const ClassifyConfig& cfg = {});

// KL(p || q) over two same-length discrete distributions. p is normalized;
// q gets 1e-9 added to every bin and is renormalized, which keeps the value
// finite when q has empty bins where p has mass. Terms with p_i == 0
// contribute nothing.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Entropy sweep for saturation thresholds.
//   Symmetric:   sweep the |x| histogram once, return (-T, T).
//   Independent: sweep the negative and positive halves separately.
//   Conjugate:   Independent, then symmetrize by the larger magnitude.
// A side holding any samples must hold at least kMinSideSamples of them.
ThresholdPair search_threshold(const Histogram& h, CalibMode mode);

constexpr int64_t kMinSideSamples = 256;
constexpr int kSweepLevels = 128;

// One calibrated tap. quantize == false marks taps whose values should stay
// in FP32 (sparse activations).
struct TapCalibration {
  DistClass dist = DistClass::Gaussian;
  CalibMode mode = CalibMode::Symmetric;
  ThresholdPair thresholds;
  bool quantize = true;
  int64_t samples = 0;
};

struct CalibrationTable {
  std::map<std::string, TapCalibration> taps;

  const TapCalibration* find(const std::string& tap) const;
  std::string to_json() const;
  static CalibrationTable from_json(const std::string& text);
};

// A tap names one input edge as "<consumer id>#<input index>"; consumers
// inside loop bodies are prefixed with "<loop id>/" per nesting level.
std::string tap_id(const std::string& consumer, int input_index);

// Every MatMul input edge plus every GatherNd params edge, including inside
// loop bodies. These are the tensors the rewrite passes quantize.
std::vector<std::string> default_taps(const Graph& g);

// Runs g once per feed (twice overall: extrema pass, then counting pass) and
// returns one histogram per requested tap. Unknown tap ids fail.
std::map<std::string, Histogram> collect_histograms(
    const Graph& g, const std::vector<Feeds>& calib_set,
    const std::vector<std::string>& taps);

// collect + classify + search. Sparse taps are marked unquantized and carry
// their observed range instead of searched thresholds.
CalibrationTable calibrate(const Graph& g, const std::vector<Feeds>& calib_set,
                           const std::vector<std::string>& taps,
                           CalibMode mode);

}  // namespace qgraph
