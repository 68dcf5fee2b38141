// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main toolkit operations. Tensors cross the
// boundary as numpy arrays, sentences as token lists, graphs and
// calibration tables as opaque handles with JSON round-trips.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qgraph/calibration.hpp"
#include "qgraph/executor.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/kernels.hpp"
#include "qgraph/pipeline.hpp"
#include "qgraph/quant.hpp"
#include "qgraph/rewriter.hpp"
#include "qgraph/toy_model.hpp"

namespace py = pybind11;
using namespace qgraph;

namespace {

using GraphPtr = std::shared_ptr<Graph>;
using TablePtr = std::shared_ptr<CalibrationTable>;

template <typename T>
py::array tensor_to_array_t(const Tensor& t, std::span<const T> data) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::memcpy(out.mutable_data(), data.data(), t.byte_size());
  return out;
}

py::array tensor_to_array(const Tensor& t) {
  switch (t.dtype()) {
    case DType::F32: return tensor_to_array_t<float>(t, t.f32());
    case DType::S8: return tensor_to_array_t<int8_t>(t, t.s8());
    case DType::U8: return tensor_to_array_t<uint8_t>(t, t.u8());
    case DType::S32: return tensor_to_array_t<int32_t>(t, t.s32());
  }
  fail(Errc::InvalidArgument, "unhandled dtype");
}

template <typename T>
std::pair<Shape, std::vector<T>> array_to_buffer(const py::array_t<T>& arr) {
  py::array_t<T, py::array::c_style> c = arr;
  Shape shape(c.ndim());
  for (py::ssize_t i = 0; i < c.ndim(); ++i)
    shape[static_cast<size_t>(i)] = static_cast<int64_t>(c.shape(i));
  const T* p = c.data();
  return {std::move(shape),
          std::vector<T>(p, p + static_cast<size_t>(c.size()))};
}

Tensor tokens_tensor(const std::vector<int32_t>& tokens) {
  if (tokens.empty())
    fail(Errc::InvalidArgument, "token list must be non-empty");
  std::vector<int32_t> copy = tokens;
  int64_t len = static_cast<int64_t>(copy.size());
  return Tensor::s32({len, 1}, std::move(copy));
}

std::string token_placeholder(const Graph& g) {
  std::string found;
  for (const auto& [id, n] : g.nodes()) {
    if (!n.is_placeholder() || n.attr_str("dtype") != "S32") continue;
    if (!found.empty())
      fail(Errc::InvalidArgument, "graph has multiple S32 placeholders ('" +
                                      found + "', '" + id + "')");
    found = id;
  }
  if (found.empty())
    fail(Errc::InvalidArgument, "graph has no S32 token placeholder");
  return found;
}

std::vector<Feeds> sentence_feeds(const Graph& g,
                                  const std::vector<std::vector<int32_t>>& s) {
  std::string ph = token_placeholder(g);
  std::vector<Feeds> feeds;
  feeds.reserve(s.size());
  for (const auto& tokens : s) {
    Feeds f;
    f.emplace(ph, tokens_tensor(tokens));
    feeds.push_back(std::move(f));
  }
  return feeds;
}

py::dict census_dict(const Graph& g) {
  py::dict d;
  for (const auto& [kind, n] : op_census(g)) d[op_name(kind)] = n;
  return d;
}

WeightPreset preset_from_name(const std::string& s) {
  if (s == "gaussian") return WeightPreset::Gaussian;
  if (s == "long-tailed") return WeightPreset::LongTailed;
  fail(Errc::InvalidArgument, "unknown weight preset '" + s + "'");
}

std::pair<GraphPtr, std::string> wrap_pass(std::pair<Graph, PassReport> r) {
  return {std::make_shared<Graph>(std::move(r.first)), r.second.to_json()};
}

py::dict equivalence_dict(const EquivalenceReport& rep) {
  py::list outs;
  for (const OutputDelta& d : rep.outputs) {
    py::dict o;
    o["output"] = d.output;
    o["max_abs"] = d.max_abs;
    o["rel_l2"] = d.rel_l2;
    outs.append(o);
  }
  py::dict r;
  r["pass"] = rep.pass;
  r["worst_rel_l2"] = rep.worst_rel_l2;
  r["outputs"] = outs;
  return r;
}

}  // namespace

PYBIND11_MODULE(_qgraph, m) {
  m.doc() = "INT8 quantization toolkit for qgraph compute graphs";
  m.attr("__version__") = "0.1.0";

  // Library errors surface as ValueError carrying the code name.
  py::register_exception<Error>(m, "QGraphError", PyExc_ValueError);

  py::class_<Graph, GraphPtr>(m, "Graph")
      .def_static("from_json",
                  [](const std::string& text) {
                    return std::make_shared<Graph>(load_graph(text));
                  },
                  py::arg("text"), "Parse a graph from its JSON form.")
      .def("to_json", [](const Graph& g) { return save_graph(g); })
      .def("size", [](const Graph& g) { return g.size(); })
      .def("census", &census_dict,
           "Node counts per op kind, keyed by kind name.")
      .def("outputs",
           [](const Graph& g) {
             std::vector<std::string> out;
             for (const EdgeRef& e : g.outputs())
               out.push_back(output_key(e.first, e.second));
             return out;
           })
      .def("__repr__", [](const Graph& g) {
        return "<qgraph.Graph '" + g.name + "' with " +
               std::to_string(g.size()) + " nodes>";
      });

  py::class_<CalibrationTable, TablePtr>(m, "CalibrationTable")
      .def_static("from_json",
                  [](const std::string& text) {
                    return std::make_shared<CalibrationTable>(
                        CalibrationTable::from_json(text));
                  },
                  py::arg("text"))
      .def("to_json",
           [](const CalibrationTable& t) { return t.to_json(); })
      .def("taps",
           [](const CalibrationTable& t) {
             py::dict d;
             for (const auto& [tap, tc] : t.taps) {
               py::dict e;
               e["dist"] = dist_class_name(tc.dist);
               e["mode"] = calib_mode_name(tc.mode);
               e["t_min"] = tc.thresholds.t_min;
               e["t_max"] = tc.thresholds.t_max;
               e["quantize"] = tc.quantize;
               e["samples"] = tc.samples;
               d[tap.c_str()] = e;
             }
             return d;
           },
           "Per-tap calibration entries keyed by '<consumer>#<input>'.");

  m.def(
      "build_toy_transformer",
      [](int64_t d_model, int64_t heads, int64_t layers, int64_t seq_len,
         int64_t vocab, int64_t decode_steps, int64_t beam, double sigma,
         const std::string& preset, uint64_t seed) {
        ToyConfig cfg;
        cfg.d_model = d_model;
        cfg.heads = heads;
        cfg.layers = layers;
        cfg.seq_len = seq_len;
        cfg.vocab = vocab;
        cfg.decode_steps = decode_steps;
        cfg.beam = beam;
        cfg.sigma = sigma;
        cfg.preset = preset_from_name(preset);
        cfg.seed = seed;
        return std::make_shared<Graph>(build_toy_transformer(cfg));
      },
      py::arg("d_model") = 16, py::arg("heads") = 2, py::arg("layers") = 2,
      py::arg("seq_len") = 8, py::arg("vocab") = 16,
      py::arg("decode_steps") = 4, py::arg("beam") = 4,
      py::arg("sigma") = 0.02, py::arg("preset") = "gaussian",
      py::arg("seed") = 0,
      "Build the encoder + looped-decoder toy model; its single placeholder "
      "'tokens' takes an (n, 1) int32 column.");

  m.def(
      "generate_corpus",
      [](int64_t count, int64_t vocab, int64_t min_len, double geometric_p,
         uint64_t seed) {
        CorpusConfig cfg;
        cfg.count = count;
        cfg.vocab = vocab;
        cfg.min_len = min_len;
        cfg.geometric_p = geometric_p;
        cfg.seed = seed;
        py::list out;
        for (const Sentence& s : generate_corpus(cfg)) {
          py::dict d;
          d["id"] = s.id;
          d["tokens"] = s.tokens;
          d["word_count"] = s.word_count;
          out.append(d);
        }
        return out;
      },
      py::arg("count") = 512, py::arg("vocab") = 16, py::arg("min_len") = 4,
      py::arg("geometric_p") = 0.25, py::arg("seed") = 0,
      "Seeded synthetic sentences: geometric lengths, uniform tokens.");

  m.def(
      "calibrate",
      [](const GraphPtr& g, const std::vector<std::vector<int32_t>>& sentences,
         const std::string& mode) {
        return std::make_shared<CalibrationTable>(
            calibrate(*g, sentence_feeds(*g, sentences), default_taps(*g),
                      calib_mode_from_name(mode)));
      },
      py::arg("graph"), py::arg("sentences"), py::arg("mode") = "conjugate",
      "Collect histograms over the sentences and search thresholds for every "
      "default tap.");

  m.def(
      "naive_quantize",
      [](const GraphPtr& g) { return wrap_pass(naive_quantize_pass(*g)); },
      py::arg("graph"),
      "Runtime-range INT8 rewrite; returns (graph, report_json).");
  m.def(
      "calibrated_quantize",
      [](const GraphPtr& g, const TablePtr& t) {
        return wrap_pass(calibrated_quantize_pass(*g, *t));
      },
      py::arg("graph"), py::arg("table"),
      "Table-driven INT8 rewrite; returns (graph, report_json).");
  m.def(
      "quantize_gathernd",
      [](const GraphPtr& g, const TablePtr& t) {
        return wrap_pass(quantize_gathernd_pass(*g, *t));
      },
      py::arg("graph"), py::arg("table"),
      "Move loop-interior gathers onto the quantized payload; returns "
      "(graph, report_json).");

  m.def(
      "run_tokens",
      [](const GraphPtr& g, const std::vector<int32_t>& tokens) {
        Feeds f;
        f.emplace(token_placeholder(*g), tokens_tensor(tokens));
        py::dict out;
        for (const auto& [key, t] : execute(*g, f))
          out[key.c_str()] = tensor_to_array(t);
        return out;
      },
      py::arg("graph"), py::arg("tokens"),
      "Feed one sentence and return the graph outputs as numpy arrays.");

  m.def(
      "verify",
      [](const GraphPtr& ref, const GraphPtr& test,
         const std::vector<std::vector<int32_t>>& sentences, double tol) {
        return equivalence_dict(
            verify_equivalence(*ref, *test, sentence_feeds(*ref, sentences), tol));
      },
      py::arg("reference"), py::arg("candidate"), py::arg("sentences"),
      py::arg("tol"),
      "Run both graphs on every sentence; pass iff every output's relative "
      "L2 delta stays within tol.");

  m.def(
      "compute_scale",
      [](double lo, double hi, const std::string& target) {
        QuantParams p = compute_scale(lo, hi, dtype_from_name(target));
        py::dict d;
        d["min"] = p.min;
        d["max"] = p.max;
        d["scale"] = p.scale;
        d["zero_offset"] = p.zero_offset;
        d["target"] = dtype_name(p.target);
        return d;
      },
      py::arg("min"), py::arg("max"), py::arg("target"),
      "Affine quantization parameters for a range ('S8' demands min == -max).");

  m.def(
      "quantize_array",
      [](const py::array_t<float>& arr, double lo, double hi,
         const std::string& target) {
        auto [shape, data] = array_to_buffer(arr);
        Tensor t = Tensor::f32(std::move(shape), std::move(data));
        return tensor_to_array(
            quantize(t, compute_scale(lo, hi, dtype_from_name(target))));
      },
      py::arg("values"), py::arg("min"), py::arg("max"), py::arg("target"),
      "Quantize a float32 array onto the integer grid for [min, max].");

  m.def(
      "dequantize_array",
      [](const py::array& arr, double lo, double hi,
         const std::string& target) {
        DType dt = dtype_from_name(target);
        QuantParams p = compute_scale(lo, hi, dt);
        Tensor t;
        if (dt == DType::S8) {
          auto [shape, data] = array_to_buffer(py::array_t<int8_t>(arr));
          t = Tensor::s8(std::move(shape), std::move(data));
        } else {
          auto [shape, data] = array_to_buffer(py::array_t<uint8_t>(arr));
          t = Tensor::u8(std::move(shape), std::move(data));
        }
        return tensor_to_array(dequantize(t, p));
      },
      py::arg("values"), py::arg("min"), py::arg("max"), py::arg("target"),
      "Map quantized integers back to float32 under the same range.");

  m.def(
      "gemm_s8u8s32",
      [](const py::array_t<int8_t>& a, const py::array_t<uint8_t>& b,
         int32_t alpha, int32_t beta, int32_t oa, int32_t ob, int32_t oc,
         const py::object& c) {
        auto [ashape, adata] = array_to_buffer(a);
        auto [bshape, bdata] = array_to_buffer(b);
        Tensor ta = Tensor::s8(std::move(ashape), std::move(adata));
        Tensor tb = Tensor::u8(std::move(bshape), std::move(bdata));
        GemmOffsets off;
        off.alpha = alpha;
        off.beta = beta;
        off.oa = oa;
        off.ob = ob;
        off.oc = oc;
        if (c.is_none()) return tensor_to_array(gemm_s8u8s32(ta, tb, off));
        auto [cshape, cdata] = array_to_buffer(py::array_t<int32_t>(c));
        Tensor tc = Tensor::s32(std::move(cshape), std::move(cdata));
        return tensor_to_array(gemm_s8u8s32(ta, tb, off, &tc));
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 1, py::arg("beta") = 0,
      py::arg("oa") = 0, py::arg("ob") = 0, py::arg("oc") = 0,
      py::arg("c") = py::none(),
      "Offset GEMM alpha*(A+oa)(B+ob) + beta*C + oc with int32 accumulation.");
}
