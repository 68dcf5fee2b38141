// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/calibration.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace qgraph {

using nlohmann::json;

Histogram::Histogram(double lo, double hi) {
  lo_ = std::min(lo, 0.0);
  hi_ = std::max(hi, 0.0);
  if (lo_ == hi_) hi_ = lo_ + 1.0;  // all-zero data: keep bin math defined
  counts_.assign(kBins, 0);
  observed_min_ = std::numeric_limits<double>::infinity();
  observed_max_ = -std::numeric_limits<double>::infinity();
}

void Histogram::add(double x) {
  if (!saw_any_) {
    observed_min_ = observed_max_ = x;
    saw_any_ = true;
  } else {
    observed_min_ = std::min(observed_min_, x);
    observed_max_ = std::max(observed_max_, x);
  }
  if (std::abs(x) <= kZeroEps)
    ++zero_count_;
  else if (x < 0)
    ++neg_count_;
  else
    ++pos_count_;
  int64_t bin =
      static_cast<int64_t>(std::floor((x - lo_) / (hi_ - lo_) * kBins));
  bin = std::clamp<int64_t>(bin, 0, kBins - 1);
  ++counts_[static_cast<size_t>(bin)];
  ++total_;
}

void Histogram::add_all(const Tensor& t) {
  switch (t.dtype()) {
    case DType::F32:
      for (float v : t.f32()) add(static_cast<double>(v));
      break;
    case DType::S8:
      for (int8_t v : t.s8()) add(static_cast<double>(v));
      break;
    case DType::U8:
      for (uint8_t v : t.u8()) add(static_cast<double>(v));
      break;
    case DType::S32:
      for (int32_t v : t.s32()) add(static_cast<double>(v));
      break;
  }
}

double Histogram::occupancy() const {
  int64_t occupied = 0;
  for (int64_t c : counts_)
    if (c > 0) ++occupied;
  return static_cast<double>(occupied) / kBins;
}

const char* dist_class_name(DistClass c) {
  switch (c) {
    case DistClass::Sparse: return "sparse";
    case DistClass::Narrow: return "narrow";
    case DistClass::Gaussian: return "gaussian";
  }
  return "?";
}

DistClass dist_class_from_name(const std::string& s) {
  if (s == "sparse") return DistClass::Sparse;
  if (s == "narrow") return DistClass::Narrow;
  if (s == "gaussian") return DistClass::Gaussian;
  fail(Errc::SchemaError, "unknown distribution class '" + s + "'");
}

const char* calib_mode_name(CalibMode m) {
  switch (m) {
    case CalibMode::Symmetric: return "symmetric";
    case CalibMode::Independent: return "independent";
    case CalibMode::Conjugate: return "conjugate";
  }
  return "?";
}

CalibMode calib_mode_from_name(const std::string& s) {
  if (s == "symmetric") return CalibMode::Symmetric;
  if (s == "independent") return CalibMode::Independent;
  if (s == "conjugate") return CalibMode::Conjugate;
  fail(Errc::SchemaError, "unknown calibration mode '" + s + "'");
}

DistClass classify_distribution(const Histogram& h, const ClassifyConfig& cfg) {
  if (h.total() == 0) fail(Errc::EmptyHistogram, "histogram holds no samples");
  double zero_fraction =
      static_cast<double>(h.zero_count()) / static_cast<double>(h.total());
  if (zero_fraction >= cfg.sparse_zero_fraction) return DistClass::Sparse;
  if (h.occupancy() <= cfg.narrow_occupancy) return DistClass::Narrow;
  return DistClass::Gaussian;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.empty() || p.size() != q.size())
    fail(Errc::SupportMismatch, "distributions must share a non-empty support");
  double sum_p = 0.0, sum_q = 0.0;
  for (double v : p) {
    if (v < 0) fail(Errc::SupportMismatch, "negative mass in p");
    sum_p += v;
  }
  constexpr double kEps = 1e-9;
  for (double v : q) {
    if (v < 0) fail(Errc::SupportMismatch, "negative mass in q");
    sum_q += v + kEps;
  }
  if (sum_p <= 0.0) fail(Errc::SupportMismatch, "p has zero total mass");
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    double pi = p[i] / sum_p;
    double qi = (q[i] + kEps) / sum_q;
    kl += pi * std::log(pi / qi);
  }
  return kl;
}

namespace {

// Mass of the signed histogram mapped through |x| onto kBins fresh bins over
// [0, T). Mass splits fractionally, treating each source bin as uniform.
struct AbsHist {
  double width = 0.0;              // T / kBins
  std::vector<double> mass;        // fractional counts
};

void spread(std::vector<double>& out, double width, double p, double q,
            double m) {
  // Distributes mass m uniformly over the value interval [p, q).
  if (q <= p || m <= 0) return;
  int64_t j0 = static_cast<int64_t>(std::floor(p / width));
  int64_t last = static_cast<int64_t>(Histogram::kBins) - 1;
  for (int64_t j = j0; j * width < q && j <= last; ++j) {
    double e0 = j * width, e1 = (j + 1) * width;
    double ov = std::min(q, e1) - std::max(p, e0);
    if (ov > 0) out[static_cast<size_t>(j)] += m * ov / (q - p);
  }
}

// side < 0: |x| histogram of the negative half only; side > 0: positive half
// only; side == 0: both halves folded together.
AbsHist fold_abs(const Histogram& h, int side) {
  double t = 0.0;
  if (side <= 0) t = std::max(t, -h.lo());
  if (side >= 0) t = std::max(t, h.hi());
  AbsHist a;
  a.mass.assign(Histogram::kBins, 0.0);
  if (t <= 0.0) return a;
  a.width = t / Histogram::kBins;
  double w_in = (h.hi() - h.lo()) / Histogram::kBins;
  for (int64_t j = 0; j < Histogram::kBins; ++j) {
    double c = static_cast<double>(h.counts()[static_cast<size_t>(j)]);
    if (c == 0) continue;
    double lo = h.lo() + j * w_in, hi = lo + w_in;
    double neg_len = std::max(0.0, std::min(hi, 0.0) - lo);
    double pos_len = std::max(0.0, hi - std::max(lo, 0.0));
    double len = hi - lo;
    if (side <= 0 && neg_len > 0)
      spread(a.mass, a.width, std::max(0.0, -hi), -lo, c * neg_len / len);
    if (side >= 0 && pos_len > 0)
      spread(a.mass, a.width, std::max(lo, 0.0), hi, c * pos_len / len);
  }
  return a;
}

// Collapses h[0..i) onto kSweepLevels equal fractional spans, then spreads
// each span's mass back over its occupied source bins, weighted by overlap.
std::vector<double> downsample_expand(const std::vector<double>& h, int64_t i) {
  std::vector<double> q(static_cast<size_t>(i), 0.0);
  double span = static_cast<double>(i) / kSweepLevels;
  for (int level = 0; level < kSweepLevels; ++level) {
    double s0 = level * span, s1 = (level + 1) * span;
    int64_t j0 = static_cast<int64_t>(std::floor(s0));
    int64_t j1 = std::min<int64_t>(i, static_cast<int64_t>(std::ceil(s1)));
    double mass = 0.0, occupied = 0.0;
    for (int64_t j = j0; j < j1; ++j) {
      double ov = std::min(static_cast<double>(j + 1), s1) -
                  std::max(static_cast<double>(j), s0);
      if (ov <= 0) continue;
      double hj = h[static_cast<size_t>(j)];
      mass += hj * ov;
      if (hj > 0) occupied += ov;
    }
    if (mass <= 0 || occupied <= 0) continue;
    for (int64_t j = j0; j < j1; ++j) {
      if (h[static_cast<size_t>(j)] <= 0) continue;
      double ov = std::min(static_cast<double>(j + 1), s1) -
                  std::max(static_cast<double>(j), s0);
      if (ov > 0) q[static_cast<size_t>(j)] += mass * ov / occupied;
    }
  }
  return q;
}

// Entropy sweep: clip ever wider prefixes [0, i) of the |x| histogram,
// compare the clipped reference (outlier mass folded into the last kept bin)
// against its kSweepLevels-level reconstruction, and keep the prefix with the
// smallest divergence. The full-range prefix i == kBins competes too.
double sweep_abs(const AbsHist& a) {
  double tail = 0.0;  // maintained as sum(mass[i..kBins)) for the current i
  for (size_t j = kSweepLevels; j < a.mass.size(); ++j) tail += a.mass[j];
  double best_kl = std::numeric_limits<double>::infinity();
  int64_t best_i = Histogram::kBins;
  std::vector<double> p;
  p.reserve(a.mass.size());
  for (int64_t i = kSweepLevels; i <= Histogram::kBins; ++i) {
    p.assign(a.mass.begin(), a.mass.begin() + i);
    p[static_cast<size_t>(i - 1)] += tail;
    double sum_p = 0.0;
    for (double v : p) sum_p += v;
    if (sum_p > 0) {
      std::vector<double> q = downsample_expand(
          std::vector<double>(a.mass.begin(), a.mass.begin() + i), i);
      double d = kl_divergence(p, q);
      if (d < best_kl) {
        best_kl = d;
        best_i = i;
      }
    }
    if (i < Histogram::kBins) tail -= a.mass[static_cast<size_t>(i)];
  }
  return best_i * a.width;
}

double sweep_side(const Histogram& h, int side, int64_t side_samples,
                  const char* side_name) {
  if (side_samples == 0) return 0.0;
  if (side_samples < kMinSideSamples)
    fail(Errc::InsufficientMass,
         std::string(side_name) + " side holds " +
             std::to_string(side_samples) + " nonzero samples, needs " +
             std::to_string(kMinSideSamples));
  return sweep_abs(fold_abs(h, side));
}

}  // namespace

ThresholdPair search_threshold(const Histogram& h, CalibMode mode) {
  if (h.total() == 0) fail(Errc::EmptyHistogram, "histogram holds no samples");
  ThresholdPair out;
  switch (mode) {
    case CalibMode::Symmetric: {
      double t = sweep_side(h, 0, h.neg_count() + h.pos_count(), "combined");
      out.t_min = -t;
      out.t_max = t;
      break;
    }
    case CalibMode::Independent: {
      out.t_min = -sweep_side(h, -1, h.neg_count(), "negative");
      out.t_max = sweep_side(h, +1, h.pos_count(), "positive");
      break;
    }
    case CalibMode::Conjugate: {
      ThresholdPair ind = search_threshold(h, CalibMode::Independent);
      double t = std::max(std::abs(ind.t_min), std::abs(ind.t_max));
      out.t_min = -t;
      out.t_max = t;
      break;
    }
  }
  return out;
}

const TapCalibration* CalibrationTable::find(const std::string& tap) const {
  auto it = taps.find(tap);
  return it == taps.end() ? nullptr : &it->second;
}

std::string CalibrationTable::to_json() const {
  json jt = json::object();
  for (const auto& [id, tc] : taps) {
    jt[id] = {{"class", dist_class_name(tc.dist)},
              {"mode", calib_mode_name(tc.mode)},
              {"t_min", tc.thresholds.t_min},
              {"t_max", tc.thresholds.t_max},
              {"quantize", tc.quantize},
              {"samples", tc.samples}};
  }
  json j;
  j["taps"] = jt;
  return j.dump(2) + "\n";
}

CalibrationTable CalibrationTable::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("taps") ||
      !j["taps"].is_object())
    fail(Errc::SchemaError, "calibration table: expected {\"taps\": {...}}");
  CalibrationTable table;
  for (const auto& [id, e] : j["taps"].items()) {
    std::string path = "taps." + id;
    if (!e.is_object() || !e.contains("class") || !e.contains("mode") ||
        !e.contains("t_min") || !e.contains("t_max") || !e.contains("quantize"))
      fail(Errc::SchemaError, path + ": missing required field");
    TapCalibration tc;
    tc.dist = dist_class_from_name(e.at("class").get<std::string>());
    tc.mode = calib_mode_from_name(e.at("mode").get<std::string>());
    if (!e.at("t_min").is_number() || !e.at("t_max").is_number() ||
        !e.at("quantize").is_boolean())
      fail(Errc::SchemaError, path + ": field has wrong type");
    tc.thresholds.t_min = e.at("t_min").get<double>();
    tc.thresholds.t_max = e.at("t_max").get<double>();
    tc.quantize = e.at("quantize").get<bool>();
    tc.samples = e.value("samples", int64_t{0});
    table.taps.emplace(id, tc);
  }
  return table;
}

std::string tap_id(const std::string& consumer, int input_index) {
  return consumer + "#" + std::to_string(input_index);
}

namespace {

void collect_taps(const Graph& g, const std::string& prefix,
                  std::vector<std::string>& out) {
  for (const auto& [id, node] : g.nodes()) {
    switch (node.kind) {
      case OpKind::MatMul:
        out.push_back(tap_id(prefix + id, 0));
        out.push_back(tap_id(prefix + id, 1));
        break;
      case OpKind::GatherNd:
        out.push_back(tap_id(prefix + id, 0));
        break;
      case OpKind::LoopRegion:
        collect_taps(*node.attr_graph("body"), prefix + id + "/", out);
        break;
      default:
        break;
    }
  }
}

}  // namespace

std::vector<std::string> default_taps(const Graph& g) {
  std::vector<std::string> out;
  collect_taps(g, "", out);
  return out;
}

std::map<std::string, Histogram> collect_histograms(
    const Graph& g, const std::vector<Feeds>& calib_set,
    const std::vector<std::string>& taps) {
  std::vector<std::string> known = default_taps(g);
  std::set<std::string> valid(known.begin(), known.end());
  std::set<std::string> wanted;
  for (const std::string& t : taps) {
    if (!valid.count(t))
      fail(Errc::UnknownTap, "'" + t + "' does not name a quantizable edge");
    wanted.insert(t);
  }

  Executor ex(g);

  struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
  };
  std::map<std::string, Range> ranges;
  EdgeObserver extrema = [&](const std::string& consumer, int input,
                             const Tensor& value) {
    auto it = ranges.find(tap_id(consumer, input));
    if (it == ranges.end() || value.dtype() != DType::F32) return;
    for (float v : value.f32()) {
      it->second.lo = std::min(it->second.lo, static_cast<double>(v));
      it->second.hi = std::max(it->second.hi, static_cast<double>(v));
      it->second.any = true;
    }
  };
  for (const std::string& t : wanted) ranges.emplace(t, Range{});
  ExecOptions opt;
  opt.observer = &extrema;
  for (const Feeds& feeds : calib_set) ex.run(feeds, opt);

  std::map<std::string, Histogram> out;
  for (const auto& [t, r] : ranges)
    out.emplace(t, r.any ? Histogram(r.lo, r.hi) : Histogram(0.0, 0.0));

  EdgeObserver counter = [&](const std::string& consumer, int input,
                             const Tensor& value) {
    auto it = out.find(tap_id(consumer, input));
    if (it == out.end() || value.dtype() != DType::F32) return;
    it->second.add_all(value);
  };
  opt.observer = &counter;
  for (const Feeds& feeds : calib_set) ex.run(feeds, opt);
  return out;
}

namespace {

// True when the tap's producer is a Const carrying an embedded value (a
// weight), as opposed to a placeholder or a computed tensor. Such taps are
// fully known at calibration time, so their exact range is the threshold; an
// entropy sweep over the few distinct values of a small weight tensor clips
// genuine extremes that the network depends on.
bool weight_const_tap(const Graph& g, const std::string& tap) {
  size_t hash = tap.rfind('#');
  if (hash == std::string::npos) return false;
  std::string path = tap.substr(0, hash);
  int input = std::stoi(tap.substr(hash + 1));
  const Graph* cur = &g;
  size_t start = 0;
  for (size_t slash = path.find('/'); slash != std::string::npos;
       slash = path.find('/', start)) {
    std::string seg = path.substr(start, slash - start);
    if (!cur->has(seg) || cur->at(seg).kind != OpKind::LoopRegion) return false;
    cur = cur->at(seg).attr_graph("body").get();
    start = slash + 1;
  }
  std::string leaf = path.substr(start);
  if (!cur->has(leaf)) return false;
  const Node& consumer = cur->at(leaf);
  if (input < 0 || static_cast<size_t>(input) >= consumer.inputs.size())
    return false;
  const EdgeRef& edge = consumer.inputs[static_cast<size_t>(input)];
  if (!cur->has(edge.first)) return false;
  const Node& producer = cur->at(edge.first);
  return producer.kind == OpKind::Const && producer.has_attr("value") &&
         edge.second == 0;
}

ThresholdPair observed_thresholds(const Histogram& h, CalibMode mode) {
  if (mode == CalibMode::Independent)
    return {std::min(h.observed_min(), 0.0), std::max(h.observed_max(), 0.0)};
  double t = std::max(std::abs(h.observed_min()), std::abs(h.observed_max()));
  return {-t, t};
}

}  // namespace

CalibrationTable calibrate(const Graph& g, const std::vector<Feeds>& calib_set,
                           const std::vector<std::string>& taps,
                           CalibMode mode) {
  std::map<std::string, Histogram> hists = collect_histograms(g, calib_set, taps);
  CalibrationTable table;
  for (const auto& [id, h] : hists) {
    TapCalibration tc;
    tc.mode = mode;
    tc.samples = h.total();
    tc.dist = classify_distribution(h);
    if (tc.dist == DistClass::Sparse) {
      tc.quantize = false;
      tc.thresholds = {h.observed_min(), h.observed_max()};
    } else {
      tc.quantize = true;
      tc.thresholds = weight_const_tap(g, id) ? observed_thresholds(h, mode)
                                              : search_threshold(h, mode);
    }
    table.taps.emplace(id, tc);
  }
  return table;
}

}  // namespace qgraph
