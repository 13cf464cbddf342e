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

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tracegraph/autodiff.hpp"
#include "tracegraph/service_graph.hpp"
#include "tracegraph/tensor.hpp"

namespace tracegraph {

enum class Activation { kRelu, kTanh, kIdentity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct ModelConfig {
  int gcn_layers = 2;
  int hidden_dim = 32;
  Activation activation = Activation::kRelu;
  bool use_residual = true;
  bool use_layer_norm = true;
  int gru_hidden = 16;
  int history_T = 3;
  std::uint64_t seed = 7;
  int input_dim = static_cast<int>(kNodeFeatureDim);
  int edge_dim = static_cast<int>(kEdgeFeatureDim);

  void validate() const;
  int embedding_dim() const { return hidden_dim + gru_hidden; }

  bool operator==(const ModelConfig&) const = default;
};

/// Learnable tensors by name:
///   input_proj                      input_dim x hidden_dim
///   gcn.W.<l>                       hidden_dim x hidden_dim
///   gcn.ln_gain.<l>, gcn.ln_bias.<l> 1 x hidden_dim (layer norm only)
///   gru.W_{r,z,h}                   edge_dim x gru_hidden
///   gru.U_{r,z,h}                   gru_hidden x gru_hidden
///   gru.b_{r,z,h}                   1 x gru_hidden
struct ModelParams {
  std::map<std::string, Tensor2> tensors;

  const Tensor2& at(const std::string& name) const;
  Tensor2& at(const std::string& name);

  /// Glorot-uniform weight matrices drawn in a fixed order from `cfg.seed`;
  /// layer-norm gains start at 1 and all biases at 0.
  static ModelParams initialize(const ModelConfig& cfg);

  /// Throws kDimension naming both sides when a tensor's shape disagrees
  /// with `cfg`.
  void validate(const ModelConfig& cfg) const;

  bool operator==(const ModelParams&) const = default;
};

/// Constant inputs for one window, precomputed once and reused every epoch.
struct PreparedGraph {
  std::int64_t window_index = 0;
  std::vector<std::string> services;
  Tensor2 adjacency;                      // normalized, |V| x |V|
  Tensor2 features;                       // X, |V| x input_dim
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<Tensor2> edge_steps;        // T tensors, |E| x edge_dim
  Tensor2 incidence_mean;                 // |V| x |E|, rows average incident edges

  std::size_t node_count() const { return services.size(); }
};

/// Validates a graph that already carries its history and precomputes the
/// operator and edge tensors. Every edge sequence must have length history_T.
PreparedGraph prepare_graph(const ServiceGraph& graph, int history_T);

/// Node ids of every parameter tensor bound onto a tape.
using ParamNodes = std::map<std::string, NodeId>;

/// Records params on the tape as trainable leaves (`trainable`) or constants.
ParamNodes bind_params(Tape& tape, const ModelParams& params, bool trainable);

// Tape-level building blocks. All row-vector convention: x * W.

NodeId gcn_forward(Tape& tape, NodeId adjacency, NodeId features,
                   const ParamNodes& p, const ModelConfig& cfg);

/// Batched GRU step: each row of z / h_prev is one edge. `ones` is a
/// rows x 1 constant used to broadcast the biases.
NodeId gru_step(Tape& tape, NodeId z, NodeId h_prev, NodeId ones,
                const ParamNodes& p);

NodeId encode_temporal(Tape& tape, const PreparedGraph& g, const ParamNodes& p,
                       const ModelConfig& cfg);

NodeId fuse(Tape& tape, NodeId h_struct, NodeId h_temp);

struct EncodedNodes {
  NodeId h_struct;
  NodeId h_temp;
  NodeId u;
};

EncodedNodes encode(Tape& tape, const PreparedGraph& g, const ParamNodes& p,
                    const ModelConfig& cfg);

// Value-level wrappers.

struct NodeEmbeddings {
  Tensor2 h_struct;  // |V| x hidden_dim
  Tensor2 h_temp;    // |V| x gru_hidden
  Tensor2 u;         // |V| x (hidden_dim + gru_hidden)
};

Tensor2 gcn_forward(const Tensor2& adjacency, const Tensor2& features,
                    const ModelParams& params, const ModelConfig& cfg);
std::vector<double> gru_step(std::span<const double> z,
                             std::span<const double> h_prev,
                             const ModelParams& params);
Tensor2 encode_temporal(const PreparedGraph& g, const ModelParams& params,
                        const ModelConfig& cfg);
Tensor2 fuse(const Tensor2& h_struct, const Tensor2& h_temp);
NodeEmbeddings forward(const PreparedGraph& g, const ModelParams& params,
                       const ModelConfig& cfg);

/// Model document: {"config": {...}, "tensors": {name: {rows, cols, data}}}.
/// `extra` tensors (centroid, threshold, feature stats) ride along in the
/// same map.
std::string model_to_json(const ModelConfig& cfg, const WindowConfig& window,
                          const std::map<std::string, Tensor2>& tensors);

struct ModelDocument {
  ModelConfig config;
  WindowConfig window;
  std::map<std::string, Tensor2> tensors;
};
ModelDocument model_from_json(const std::string& text);

}  // namespace tracegraph
