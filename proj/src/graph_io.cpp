// Copyright 2026 The qgraph Authors
// SPDX-License-Identifier: Apache-2.0
#include "qgraph/graph_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace qgraph {

using nlohmann::json;

nlohmann::json tensor_to_json(const Tensor& t) {
  json j;
  j["dtype"] = dtype_name(t.dtype());
  j["shape"] = t.shape();
  json data = json::array();
  switch (t.dtype()) {
    case DType::F32:
      for (float v : t.f32()) {
        if (!std::isfinite(v))
          fail(Errc::SchemaError, "non-finite F32 value is not serializable");
        data.push_back(static_cast<double>(v));
      }
      break;
    case DType::S8:
      for (int8_t v : t.s8()) data.push_back(static_cast<int64_t>(v));
      break;
    case DType::U8:
      for (uint8_t v : t.u8()) data.push_back(static_cast<int64_t>(v));
      break;
    case DType::S32:
      for (int32_t v : t.s32()) data.push_back(static_cast<int64_t>(v));
      break;
  }
  j["data"] = std::move(data);
  return j;
}

namespace {

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  fail(Errc::SchemaError, path + ": " + what);
}

const json& need_key(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) schema_fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema_fail(path, std::string("missing key '") + key + "'");
  return *it;
}

int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    schema_fail(path, "expected an integer");
  return j.get<int64_t>();
}

}  // namespace

Tensor tensor_from_json(const json& j, const std::string& path) {
  const json& jd = need_key(j, "dtype", path);
  if (!jd.is_string()) schema_fail(path + ".dtype", "expected a string");
  DType dtype;
  try {
    dtype = dtype_from_name(jd.get<std::string>());
  } catch (const Error& e) {
    schema_fail(path + ".dtype", e.what());
  }
  const json& js = need_key(j, "shape", path);
  if (!js.is_array()) schema_fail(path + ".shape", "expected an array");
  Shape shape;
  for (size_t i = 0; i < js.size(); ++i)
    shape.push_back(as_int(js[i], path + ".shape[" + std::to_string(i) + "]"));
  const json& jdata = need_key(j, "data", path);
  if (!jdata.is_array()) schema_fail(path + ".data", "expected an array");

  auto elem_path = [&](size_t i) { return path + ".data[" + std::to_string(i) + "]"; };
  try {
    switch (dtype) {
      case DType::F32: {
        std::vector<float> v;
        v.reserve(jdata.size());
        for (size_t i = 0; i < jdata.size(); ++i) {
          if (!jdata[i].is_number()) schema_fail(elem_path(i), "expected a number");
          v.push_back(static_cast<float>(jdata[i].get<double>()));
        }
        return Tensor::f32(std::move(shape), std::move(v));
      }
      case DType::S8: {
        std::vector<int8_t> v;
        v.reserve(jdata.size());
        for (size_t i = 0; i < jdata.size(); ++i) {
          int64_t x = as_int(jdata[i], elem_path(i));
          if (x < -128 || x > 127) schema_fail(elem_path(i), "S8 out of range");
          v.push_back(static_cast<int8_t>(x));
        }
        return Tensor::s8(std::move(shape), std::move(v));
      }
      case DType::U8: {
        std::vector<uint8_t> v;
        v.reserve(jdata.size());
        for (size_t i = 0; i < jdata.size(); ++i) {
          int64_t x = as_int(jdata[i], elem_path(i));
          if (x < 0 || x > 255) schema_fail(elem_path(i), "U8 out of range");
          v.push_back(static_cast<uint8_t>(x));
        }
        return Tensor::u8(std::move(shape), std::move(v));
      }
      case DType::S32: {
        std::vector<int32_t> v;
        v.reserve(jdata.size());
        for (size_t i = 0; i < jdata.size(); ++i) {
          int64_t x = as_int(jdata[i], elem_path(i));
          if (x < INT32_MIN || x > INT32_MAX) schema_fail(elem_path(i), "S32 out of range");
          v.push_back(static_cast<int32_t>(x));
        }
        return Tensor::s32(std::move(shape), std::move(v));
      }
    }
  } catch (const Error& e) {
    if (e.code() == Errc::ShapeMismatch) schema_fail(path, e.what());
    throw;
  }
  schema_fail(path, "bad dtype");
}

namespace {

json attr_to_json(const AttrValue& v) {
  json j;
  std::visit(
      [&j](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Tensor>) j = tensor_to_json(x);
        else if constexpr (std::is_same_v<T, GraphRef>) j = graph_to_json(*x);
        else j = x;
      },
      v);
  return j;
}

AttrValue attr_from_json(const json& j, const std::string& path) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<std::string> v;
    for (size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_string())
        schema_fail(path + "[" + std::to_string(i) + "]", "expected a string");
      v.push_back(j[i].get<std::string>());
    }
    return v;
  }
  if (j.is_object()) {
    if (j.contains("dtype")) return tensor_from_json(j, path);
    if (j.contains("nodes")) return GraphRef(std::make_shared<Graph>(graph_from_json(j, path)));
    schema_fail(path, "object attr is neither a tensor nor a graph");
  }
  schema_fail(path, "unsupported attr value");
}

std::vector<EdgeRef> edges_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) schema_fail(path, "expected an array");
  std::vector<EdgeRef> out;
  for (size_t i = 0; i < j.size(); ++i) {
    std::string p = path + "[" + std::to_string(i) + "]";
    const json& e = j[i];
    if (!e.is_array() || e.size() != 2) schema_fail(p, "expected [id, slot]");
    if (!e[0].is_string()) schema_fail(p + "[0]", "expected a string id");
    out.push_back({e[0].get<std::string>(), static_cast<int>(as_int(e[1], p + "[1]"))});
  }
  return out;
}

json edges_to_json(const std::vector<EdgeRef>& edges) {
  json j = json::array();
  for (const auto& [id, slot] : edges) j.push_back(json::array({id, slot}));
  return j;
}

}  // namespace

nlohmann::json graph_to_json(const Graph& g) {
  json j;
  j["name"] = g.name;
  json nodes = json::array();
  for (const auto& [id, n] : g.nodes()) {
    (void)id;
    json jn;
    jn["id"] = n.id;
    jn["kind"] = op_name(n.kind);
    jn["inputs"] = edges_to_json(n.inputs);
    json attrs = json::object();
    for (const auto& [k, v] : n.attrs) attrs[k] = attr_to_json(v);
    jn["attrs"] = std::move(attrs);
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  j["outputs"] = edges_to_json(g.outputs());
  return j;
}

Graph graph_from_json(const json& j, const std::string& path) {
  const json& jname = need_key(j, "name", path);
  if (!jname.is_string()) schema_fail(path + ".name", "expected a string");
  Graph g(jname.get<std::string>());

  const json& jnodes = need_key(j, "nodes", path);
  if (!jnodes.is_array()) schema_fail(path + ".nodes", "expected an array");
  for (size_t i = 0; i < jnodes.size(); ++i) {
    std::string p = path + ".nodes[" + std::to_string(i) + "]";
    const json& jn = jnodes[i];
    Node n;
    const json& jid = need_key(jn, "id", p);
    if (!jid.is_string()) schema_fail(p + ".id", "expected a string");
    n.id = jid.get<std::string>();
    const json& jkind = need_key(jn, "kind", p);
    if (!jkind.is_string()) schema_fail(p + ".kind", "expected a string");
    try {
      n.kind = op_from_name(jkind.get<std::string>());
    } catch (const Error& e) {
      schema_fail(p + ".kind", e.what());
    }
    n.inputs = edges_from_json(need_key(jn, "inputs", p), p + ".inputs");
    const json& jattrs = need_key(jn, "attrs", p);
    if (!jattrs.is_object()) schema_fail(p + ".attrs", "expected an object");
    for (auto it = jattrs.begin(); it != jattrs.end(); ++it)
      n.attrs.emplace(it.key(), attr_from_json(it.value(), p + ".attrs." + it.key()));
    try {
      g.add(std::move(n));
    } catch (const Error& e) {
      schema_fail(p, e.what());
    }
  }
  g.set_outputs(edges_from_json(need_key(j, "outputs", path), path + ".outputs"));
  return g;
}

std::string save_graph(const Graph& g) { return graph_to_json(g).dump(2) + "\n"; }

Graph load_graph(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(Errc::SchemaError, "$: not valid JSON");
  return graph_from_json(j, "$");
}

std::string read_text_file(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open '" + file + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) fail(Errc::IoError, "read failed on '" + file + "'");
  return os.str();
}

void write_text_file(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + file + "' for writing");
  out << text;
  out.flush();
  if (!out) fail(Errc::IoError, "write failed on '" + file + "'");
}

void save_graph_file(const Graph& g, const std::string& file) {
  write_text_file(file, save_graph(g));
}

Graph load_graph_file(const std::string& file) {
  return load_graph(read_text_file(file));
}

}  // namespace qgraph
