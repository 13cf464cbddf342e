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
#include <string_view>
#include <vector>

#include "tracegraph/tensor.hpp"

namespace tracegraph {

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct NodeId {
  std::size_t index = 0;
  bool operator==(const NodeId&) const = default;
};

enum class OpKind {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kSub,
  kHadamard,
  kScalarMul,
  kSigmoid,
  kTanh,
  kRelu,
  kConcatCols,
  kRowMean,
  kSumSq,
  kLayerNormRow,
};

std::string_view to_string(OpKind kind);

inline constexpr double kLayerNormVarianceFloor = 1e-8;

/// Append-only reverse-mode tape over Tensor2 values.
///
/// Every op validates shapes, evaluates eagerly, and rejects non-finite
/// results. Inputs of node k always have ids < k, so backward() is a single
/// reverse sweep. The tape is single-shot: backward() may run once.
class Tape {
 public:
  NodeId constant(Tensor2 value);
  /// Leaf whose gradient is reported by grad().
  NodeId parameter(Tensor2 value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scalar_mul(NodeId a, double c);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId concat_cols(NodeId a, NodeId b);
  /// Mean over rows: (r x c) -> (1 x c).
  NodeId row_mean(NodeId a);
  /// Sum of squared entries: (r x c) -> (1 x 1).
  NodeId sum_sq(NodeId a);
  /// Per-row normalization to zero mean / unit variance (variance floored at
  /// kLayerNormVarianceFloor), then per-column gain (1 x c) and bias (1 x c).
  NodeId layer_norm_row(NodeId x, NodeId gain, NodeId bias);

  const Tensor2& value(NodeId id) const;
  /// Gradient of the loss passed to backward(); zero for nodes the loss does
  /// not depend on.
  const Tensor2& grad(NodeId id) const;
  OpKind kind(NodeId id) const;

  void backward(NodeId loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::kConstant;
    NodeId a{};
    NodeId b{};
    NodeId c{};
    double scalar = 0.0;
    Tensor2 value{};
    Tensor2 grad{};
    // layer_norm_row caches
    Tensor2 xhat{};
    std::vector<double> inv_std{};
  };

  const Node& node(NodeId id) const;
  NodeId push(Node node, std::string_view op);
  void require_same_shape(std::string_view op, NodeId a, NodeId b) const;
  void accumulate(NodeId id, const Tensor2& g);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace tracegraph
