// Copyright 2026 The tracegraph Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tracegraph/model.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "tracegraph/error.hpp"
#include "tracegraph/json_writer.hpp"

namespace tracegraph {

using nlohmann::json;

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "relu";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw Error(ErrorCode::kConfig, "unknown activation '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) {
      throw Error(ErrorCode::kConfig, std::string("model.") + name + " must be > 0");
    }
  };
  positive(gcn_layers, "gcn_layers");
  positive(hidden_dim, "hidden_dim");
  positive(gru_hidden, "gru_hidden");
  positive(history_T, "history_T");
  positive(input_dim, "input_dim");
  positive(edge_dim, "edge_dim");
}

namespace {

std::string layer_name(const char* base, int l) {
  return std::string(base) + "." + std::to_string(l);
}

const char* const kGruGates[] = {"r", "z", "h"};

// Portable uniform draw in [0, 1) from the top 53 bits.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Tensor2 glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = -a + 2.0 * a * unit_uniform(rng);
  return t;
}

NodeId activate(Tape& tape, NodeId x, Activation a) {
  switch (a) {
    case Activation::kRelu: return tape.relu(x);
    case Activation::kTanh: return tape.tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

NodeId param(const ParamNodes& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) {
    throw Error(ErrorCode::kDimension, "model parameter '" + name + "' is missing");
  }
  return it->second;
}

}  // namespace

const Tensor2& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw Error(ErrorCode::kDimension, "model parameter '" + name + "' is missing");
  }
  return it->second;
}

Tensor2& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw Error(ErrorCode::kDimension, "model parameter '" + name + "' is missing");
  }
  return it->second;
}

ModelParams ModelParams::initialize(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const auto in = static_cast<std::size_t>(cfg.input_dim);
  const auto hid = static_cast<std::size_t>(cfg.hidden_dim);
  const auto ed = static_cast<std::size_t>(cfg.edge_dim);
  const auto gh = static_cast<std::size_t>(cfg.gru_hidden);

  ModelParams p;
  p.tensors["input_proj"] = glorot(in, hid, rng);
  for (int l = 0; l < cfg.gcn_layers; ++l) {
    p.tensors[layer_name("gcn.W", l)] = glorot(hid, hid, rng);
    if (cfg.use_layer_norm) {
      p.tensors[layer_name("gcn.ln_gain", l)] = Tensor2(1, hid, 1.0);
      p.tensors[layer_name("gcn.ln_bias", l)] = Tensor2(1, hid, 0.0);
    }
  }
  for (const char* g : kGruGates) {
    p.tensors[std::string("gru.W_") + g] = glorot(ed, gh, rng);
  }
  for (const char* g : kGruGates) {
    p.tensors[std::string("gru.U_") + g] = glorot(gh, gh, rng);
  }
  for (const char* g : kGruGates) {
    p.tensors[std::string("gru.b_") + g] = Tensor2(1, gh, 0.0);
  }
  return p;
}

void ModelParams::validate(const ModelConfig& cfg) const {
  cfg.validate();
  auto expect = [&](const std::string& name, std::size_t rows, std::size_t cols,
                    const char* row_what, const char* col_what) {
    const Tensor2& t = at(name);
    if (t.rows() != rows) {
      throw Error(ErrorCode::kDimension,
                  "model " + std::string(row_what) + " " + std::to_string(rows) +
                      " does not match tensor " + name + " rows " +
                      std::to_string(t.rows()));
    }
    if (t.cols() != cols) {
      throw Error(ErrorCode::kDimension,
                  "model " + std::string(col_what) + " " + std::to_string(cols) +
                      " does not match tensor " + name + " cols " +
                      std::to_string(t.cols()));
    }
    if (!t.all_finite()) {
      throw Error(ErrorCode::kNumeric, "tensor " + name + " has non-finite entries");
    }
  };
  const auto in = static_cast<std::size_t>(cfg.input_dim);
  const auto hid = static_cast<std::size_t>(cfg.hidden_dim);
  const auto ed = static_cast<std::size_t>(cfg.edge_dim);
  const auto gh = static_cast<std::size_t>(cfg.gru_hidden);
  expect("input_proj", in, hid, "input_dim", "hidden_dim");
  for (int l = 0; l < cfg.gcn_layers; ++l) {
    expect(layer_name("gcn.W", l), hid, hid, "hidden_dim", "hidden_dim");
    if (cfg.use_layer_norm) {
      expect(layer_name("gcn.ln_gain", l), 1, hid, "layer-norm rows", "hidden_dim");
      expect(layer_name("gcn.ln_bias", l), 1, hid, "layer-norm rows", "hidden_dim");
    }
  }
  for (const char* g : kGruGates) {
    expect(std::string("gru.W_") + g, ed, gh, "edge_dim", "gru_hidden");
    expect(std::string("gru.U_") + g, gh, gh, "gru_hidden", "gru_hidden");
    expect(std::string("gru.b_") + g, 1, gh, "bias rows", "gru_hidden");
  }
}

PreparedGraph prepare_graph(const ServiceGraph& graph, int history_T) {
  graph.validate();
  PreparedGraph pg;
  pg.window_index = graph.window_index;
  pg.services = graph.services;
  pg.adjacency = normalize_adjacency(graph.A);
  pg.features = graph.X;

  const std::size_t n = graph.node_count();
  const auto T = static_cast<std::size_t>(history_T);
  const std::size_t E = graph.edge_series.size();
  std::size_t edge_dim = kEdgeFeatureDim;
  for (const auto& e : graph.edge_series) {
    if (e.vectors.size() != T) {
      throw Error(ErrorCode::kDimension,
                  "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                      ") has history length " + std::to_string(e.vectors.size()) +
                      ", expected history_T " + std::to_string(T));
    }
    edge_dim = e.vectors.front().size();
    pg.edges.emplace_back(e.i, e.j);
  }
  pg.edge_steps.assign(T, Tensor2(E, edge_dim));
  for (std::size_t k = 0; k < E; ++k) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto& v = graph.edge_series[k].vectors[t];
      for (std::size_t c = 0; c < edge_dim; ++c) pg.edge_steps[t](k, c) = v[c];
    }
  }

  std::vector<double> degree(n, 0.0);
  for (const auto& [i, j] : pg.edges) {
    degree[i] += 1.0;
    if (j != i) degree[j] += 1.0;
  }
  pg.incidence_mean = Tensor2(n, E);
  for (std::size_t k = 0; k < E; ++k) {
    const auto [i, j] = pg.edges[k];
    pg.incidence_mean(i, k) = 1.0 / degree[i];
    if (j != i) pg.incidence_mean(j, k) = 1.0 / degree[j];
  }
  return pg;
}

ParamNodes bind_params(Tape& tape, const ModelParams& params, bool trainable) {
  ParamNodes nodes;
  for (const auto& [name, t] : params.tensors) {
    nodes[name] = trainable ? tape.parameter(t) : tape.constant(t);
  }
  return nodes;
}

NodeId gcn_forward(Tape& tape, NodeId adjacency, NodeId features,
                   const ParamNodes& p, const ModelConfig& cfg) {
  NodeId h = tape.matmul(features, param(p, "input_proj"));
  for (int l = 0; l < cfg.gcn_layers; ++l) {
    NodeId z = tape.matmul(tape.matmul(adjacency, h), param(p, layer_name("gcn.W", l)));
    if (cfg.use_layer_norm) {
      z = tape.layer_norm_row(z, param(p, layer_name("gcn.ln_gain", l)),
                              param(p, layer_name("gcn.ln_bias", l)));
    }
    NodeId next = activate(tape, z, cfg.activation);
    h = cfg.use_residual ? tape.add(next, h) : next;
  }
  return h;
}

NodeId gru_step(Tape& tape, NodeId z, NodeId h_prev, NodeId ones,
                const ParamNodes& p) {
  auto affine = [&](const char* gate, NodeId h_in) {
    const std::string g(gate);
    NodeId zw = tape.matmul(z, param(p, "gru.W_" + g));
    NodeId hu = tape.matmul(h_in, param(p, "gru.U_" + g));
    NodeId b = tape.matmul(ones, param(p, "gru.b_" + g));
    return tape.add(tape.add(zw, hu), b);
  };
  NodeId reset = tape.sigmoid(affine("r", h_prev));
  NodeId update = tape.sigmoid(affine("z", h_prev));
  NodeId candidate = tape.tanh(affine("h", tape.hadamard(reset, h_prev)));
  const std::size_t rows = tape.value(h_prev).rows();
  const std::size_t cols = tape.value(h_prev).cols();
  NodeId keep = tape.sub(tape.constant(Tensor2(rows, cols, 1.0)), update);
  return tape.add(tape.hadamard(keep, candidate), tape.hadamard(update, h_prev));
}

NodeId encode_temporal(Tape& tape, const PreparedGraph& g, const ParamNodes& p,
                       const ModelConfig& cfg) {
  if (g.edge_steps.size() != static_cast<std::size_t>(cfg.history_T)) {
    throw Error(ErrorCode::kDimension,
                "graph history length " + std::to_string(g.edge_steps.size()) +
                    " does not match model history_T " + std::to_string(cfg.history_T));
  }
  const std::size_t E = g.edges.size();
  const auto gh = static_cast<std::size_t>(cfg.gru_hidden);
  NodeId ones = tape.constant(Tensor2(E, 1, 1.0));
  NodeId h = tape.constant(Tensor2(E, gh));
  for (const auto& step : g.edge_steps) {
    h = gru_step(tape, tape.constant(step), h, ones, p);
  }
  return tape.matmul(tape.constant(g.incidence_mean), h);
}

NodeId fuse(Tape& tape, NodeId h_struct, NodeId h_temp) {
  return tape.concat_cols(h_struct, h_temp);
}

EncodedNodes encode(Tape& tape, const PreparedGraph& g, const ParamNodes& p,
                    const ModelConfig& cfg) {
  if (g.features.cols() != static_cast<std::size_t>(cfg.input_dim)) {
    throw Error(ErrorCode::kDimension,
                "graph feature dim " + std::to_string(g.features.cols()) +
                    " does not match model input_dim " + std::to_string(cfg.input_dim));
  }
  EncodedNodes out{};
  out.h_struct = gcn_forward(tape, tape.constant(g.adjacency),
                             tape.constant(g.features), p, cfg);
  out.h_temp = encode_temporal(tape, g, p, cfg);
  out.u = fuse(tape, out.h_struct, out.h_temp);
  return out;
}

Tensor2 gcn_forward(const Tensor2& adjacency, const Tensor2& features,
                    const ModelParams& params, const ModelConfig& cfg) {
  Tape tape;
  auto p = bind_params(tape, params, false);
  return tape.value(gcn_forward(tape, tape.constant(adjacency),
                                tape.constant(features), p, cfg));
}

std::vector<double> gru_step(std::span<const double> z,
                             std::span<const double> h_prev,
                             const ModelParams& params) {
  Tape tape;
  auto p = bind_params(tape, params, false);
  NodeId zn = tape.constant(Tensor2::from(1, z.size(), {z.begin(), z.end()}));
  NodeId hn = tape.constant(
      Tensor2::from(1, h_prev.size(), {h_prev.begin(), h_prev.end()}));
  NodeId out = gru_step(tape, zn, hn, tape.constant(Tensor2(1, 1, 1.0)), p);
  return tape.value(out).values();
}

Tensor2 encode_temporal(const PreparedGraph& g, const ModelParams& params,
                        const ModelConfig& cfg) {
  Tape tape;
  auto p = bind_params(tape, params, false);
  return tape.value(encode_temporal(tape, g, p, cfg));
}

Tensor2 fuse(const Tensor2& h_struct, const Tensor2& h_temp) {
  Tape tape;
  return tape.value(fuse(tape, tape.constant(h_struct), tape.constant(h_temp)));
}

NodeEmbeddings forward(const PreparedGraph& g, const ModelParams& params,
                       const ModelConfig& cfg) {
  Tape tape;
  auto p = bind_params(tape, params, false);
  EncodedNodes enc = encode(tape, g, p, cfg);
  return NodeEmbeddings{tape.value(enc.h_struct), tape.value(enc.h_temp),
                        tape.value(enc.u)};
}

std::string model_to_json(const ModelConfig& cfg, const WindowConfig& window,
                          const std::map<std::string, Tensor2>& tensors) {
  JsonWriter w;
  w.begin_object();
  w.key("config").begin_object();
  w.key("model").begin_object();
  w.key("gcn_layers").value(cfg.gcn_layers);
  w.key("hidden_dim").value(cfg.hidden_dim);
  w.key("activation").value(to_string(cfg.activation));
  w.key("use_residual").value(cfg.use_residual);
  w.key("use_layer_norm").value(cfg.use_layer_norm);
  w.key("gru_hidden").value(cfg.gru_hidden);
  w.key("history_T").value(cfg.history_T);
  w.key("seed").value(cfg.seed);
  w.key("input_dim").value(cfg.input_dim);
  w.key("edge_dim").value(cfg.edge_dim);
  w.end_object();
  w.key("window").begin_object();
  w.key("length_us").value(window.window_length_us);
  w.key("history_T").value(window.history_T);
  w.key("standardization")
      .value(window.standardization == Standardization::kZScore ? "zscore" : "none");
  w.end_object();
  w.end_object();
  w.key("tensors").begin_object();
  for (const auto& [name, t] : tensors) {
    w.key(name).begin_object();
    w.key("rows").value(static_cast<std::uint64_t>(t.rows()));
    w.key("cols").value(static_cast<std::uint64_t>(t.cols()));
    w.key("data").array(t.data());
    w.end_object();
  }
  w.end_object();
  w.end_object();
  return w.str() + "\n";
}

ModelDocument model_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kInput, "model document is not a JSON object");
  }
  try {
    ModelDocument doc;
    const json& m = j.at("config").at("model");
    doc.config.gcn_layers = m.at("gcn_layers").get<int>();
    doc.config.hidden_dim = m.at("hidden_dim").get<int>();
    doc.config.activation = activation_from_string(m.at("activation").get<std::string>());
    doc.config.use_residual = m.at("use_residual").get<bool>();
    doc.config.use_layer_norm = m.at("use_layer_norm").get<bool>();
    doc.config.gru_hidden = m.at("gru_hidden").get<int>();
    doc.config.history_T = m.at("history_T").get<int>();
    doc.config.seed = m.at("seed").get<std::uint64_t>();
    doc.config.input_dim = m.at("input_dim").get<int>();
    doc.config.edge_dim = m.at("edge_dim").get<int>();
    const json& w = j.at("config").at("window");
    doc.window.window_length_us = w.at("length_us").get<std::int64_t>();
    doc.window.history_T = w.at("history_T").get<int>();
    const auto st = w.at("standardization").get<std::string>();
    if (st != "zscore" && st != "none") {
      throw Error(ErrorCode::kInput, "unknown standardization '" + st + "'");
    }
    doc.window.standardization =
        st == "zscore" ? Standardization::kZScore : Standardization::kNone;
    for (const auto& [name, t] : j.at("tensors").items()) {
      doc.tensors[name] = Tensor2::from(t.at("rows").get<std::size_t>(),
                                        t.at("cols").get<std::size_t>(),
                                        t.at("data").get<std::vector<double>>());
    }
    doc.config.validate();
    return doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInput, std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace tracegraph
