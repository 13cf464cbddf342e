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

#include "tracegraph/autodiff.hpp"

#include <cmath>
#include <string>

#include "tracegraph/error.hpp"
#include "tracegraph/kernels.hpp"

namespace tracegraph {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kHadamard: return "hadamard";
    case OpKind::kScalarMul: return "scalar_mul";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kRowMean: return "row_mean";
    case OpKind::kSumSq: return "sum_sq";
    case OpKind::kLayerNormRow: return "layer_norm_row";
  }
  return "unknown";
}

namespace {

Tensor2 zeros_like(const Tensor2& t) { return Tensor2(t.rows(), t.cols()); }

void add_into(Tensor2& dst, const Tensor2& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename F>
Tensor2 zip(const Tensor2& a, const Tensor2& b, F f) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = f(a.data()[i], b.data()[i]);
  }
  return out;
}

}  // namespace

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw Error(ErrorCode::kState,
                "tape: unknown node id " + std::to_string(id.index));
  }
  return nodes_[id.index];
}

NodeId Tape::push(Node n, std::string_view op) {
  if (backward_done_) {
    throw Error(ErrorCode::kState, "tape: cannot record ops after backward()");
  }
  if (!n.value.all_finite()) {
    throw Error(ErrorCode::kNumeric,
                std::string(op) + ": non-finite result at node " +
                    std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

void Tape::require_same_shape(std::string_view op, NodeId a, NodeId b) const {
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw Error(ErrorCode::kDimension, std::string(op) + ": shape mismatch " +
                                           va.shape_string() + " vs " +
                                           vb.shape_string());
  }
}

NodeId Tape::constant(Tensor2 value) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::kNumeric, "constant: non-finite input");
  }
  return push(Node{.kind = OpKind::kConstant, .value = std::move(value)},
              "constant");
}

NodeId Tape::parameter(Tensor2 value) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::kNumeric, "parameter: non-finite input");
  }
  return push(Node{.kind = OpKind::kParameter, .value = std::move(value)},
              "parameter");
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  return push(Node{.kind = OpKind::kMatmul, .a = a, .b = b,
                   .value = kernels::matmul(va, vb)},
              "matmul");
}

NodeId Tape::add(NodeId a, NodeId b) {
  require_same_shape("add", a, b);
  return push(Node{.kind = OpKind::kAdd, .a = a, .b = b,
                   .value = zip(node(a).value, node(b).value,
                                [](double x, double y) { return x + y; })},
              "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  require_same_shape("sub", a, b);
  return push(Node{.kind = OpKind::kSub, .a = a, .b = b,
                   .value = zip(node(a).value, node(b).value,
                                [](double x, double y) { return x - y; })},
              "sub");
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  require_same_shape("hadamard", a, b);
  return push(Node{.kind = OpKind::kHadamard, .a = a, .b = b,
                   .value = zip(node(a).value, node(b).value,
                                [](double x, double y) { return x * y; })},
              "hadamard");
}

NodeId Tape::scalar_mul(NodeId a, double c) {
  const auto& va = node(a).value;
  Tensor2 out(va.rows(), va.cols());
  for (std::size_t i = 0; i < va.size(); ++i) out.data()[i] = c * va.data()[i];
  return push(Node{.kind = OpKind::kScalarMul, .a = a, .scalar = c,
                   .value = std::move(out)},
              "scalar_mul");
}

NodeId Tape::sigmoid(NodeId a) {
  return push(Node{.kind = OpKind::kSigmoid, .a = a,
                   .value = kernels::unary(kernels::UnaryOp::kSigmoid,
                                           node(a).value)},
              "sigmoid");
}

NodeId Tape::tanh(NodeId a) {
  return push(Node{.kind = OpKind::kTanh, .a = a,
                   .value = kernels::unary(kernels::UnaryOp::kTanh,
                                           node(a).value)},
              "tanh");
}

NodeId Tape::relu(NodeId a) {
  return push(Node{.kind = OpKind::kRelu, .a = a,
                   .value = kernels::unary(kernels::UnaryOp::kRelu,
                                           node(a).value)},
              "relu");
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  if (va.rows() != vb.rows()) {
    throw Error(ErrorCode::kDimension, "concat_cols: row mismatch " +
                                           va.shape_string() + " vs " +
                                           vb.shape_string());
  }
  Tensor2 out(va.rows(), va.cols() + vb.cols());
  for (std::size_t r = 0; r < va.rows(); ++r) {
    for (std::size_t c = 0; c < va.cols(); ++c) out(r, c) = va(r, c);
    for (std::size_t c = 0; c < vb.cols(); ++c) out(r, va.cols() + c) = vb(r, c);
  }
  return push(Node{.kind = OpKind::kConcatCols, .a = a, .b = b,
                   .value = std::move(out)},
              "concat_cols");
}

NodeId Tape::row_mean(NodeId a) {
  const auto& va = node(a).value;
  if (va.rows() == 0) {
    throw Error(ErrorCode::kDimension, "row_mean: input has no rows");
  }
  Tensor2 out(1, va.cols());
  for (std::size_t r = 0; r < va.rows(); ++r) {
    for (std::size_t c = 0; c < va.cols(); ++c) out(0, c) += va(r, c);
  }
  const double inv = 1.0 / static_cast<double>(va.rows());
  for (std::size_t c = 0; c < va.cols(); ++c) out(0, c) *= inv;
  return push(Node{.kind = OpKind::kRowMean, .a = a, .value = std::move(out)},
              "row_mean");
}

NodeId Tape::sum_sq(NodeId a) {
  const auto& va = node(a).value;
  double acc = 0.0;
  for (double v : va.data()) acc += v * v;
  return push(Node{.kind = OpKind::kSumSq, .a = a, .value = Tensor2(1, 1, acc)},
              "sum_sq");
}

NodeId Tape::layer_norm_row(NodeId x, NodeId gain, NodeId bias) {
  Node n{.kind = OpKind::kLayerNormRow, .a = x, .b = gain, .c = bias};
  const auto& vx = node(x).value;
  if (vx.size() >= kernels::kParallelThreshold) {
    kernels::parallel::layer_norm_rows(vx, node(gain).value, node(bias).value,
                                       kLayerNormVarianceFloor, n.value, n.xhat,
                                       n.inv_std);
  } else {
    kernels::serial::layer_norm_rows(vx, node(gain).value, node(bias).value,
                                     kLayerNormVarianceFloor, n.value, n.xhat,
                                     n.inv_std);
  }
  return push(std::move(n), "layer_norm_row");
}

const Tensor2& Tape::value(NodeId id) const { return node(id).value; }

const Tensor2& Tape::grad(NodeId id) const {
  if (!backward_done_) {
    throw Error(ErrorCode::kState, "tape: grad() requested before backward()");
  }
  return node(id).grad;
}

OpKind Tape::kind(NodeId id) const { return node(id).kind; }

void Tape::accumulate(NodeId id, const Tensor2& g) {
  add_into(nodes_[id.index].grad, g);
}

void Tape::backward(NodeId loss) {
  if (backward_done_) {
    throw Error(ErrorCode::kState,
                "tape: backward() already ran; rebuild the tape per step");
  }
  const auto& lv = node(loss).value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw Error(ErrorCode::kDimension,
                "backward: loss must be 1x1, got " + lv.shape_string());
  }
  backward_done_ = true;
  for (auto& n : nodes_) n.grad = zeros_like(n.value);
  nodes_[loss.index].grad(0, 0) = 1.0;

  for (std::size_t k = loss.index + 1; k-- > 0;) {
    Node& n = nodes_[k];
    const Tensor2& g = n.grad;
    switch (n.kind) {
      case OpKind::kConstant:
      case OpKind::kParameter:
        break;
      case OpKind::kMatmul: {
        const Tensor2& va = nodes_[n.a.index].value;
        const Tensor2& vb = nodes_[n.b.index].value;
        accumulate(n.a, kernels::matmul_nt(g, vb));
        accumulate(n.b, kernels::matmul_tn(va, g));
        break;
      }
      case OpKind::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case OpKind::kSub: {
        accumulate(n.a, g);
        Tensor2 neg(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) neg.data()[i] = -g.data()[i];
        accumulate(n.b, neg);
        break;
      }
      case OpKind::kHadamard: {
        const Tensor2& va = nodes_[n.a.index].value;
        const Tensor2& vb = nodes_[n.b.index].value;
        accumulate(n.a, zip(g, vb, [](double x, double y) { return x * y; }));
        accumulate(n.b, zip(g, va, [](double x, double y) { return x * y; }));
        break;
      }
      case OpKind::kScalarMul: {
        Tensor2 d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) d.data()[i] = n.scalar * g.data()[i];
        accumulate(n.a, d);
        break;
      }
      case OpKind::kSigmoid:
        accumulate(n.a, zip(g, n.value,
                            [](double gi, double y) { return gi * y * (1.0 - y); }));
        break;
      case OpKind::kTanh:
        accumulate(n.a, zip(g, n.value,
                            [](double gi, double y) { return gi * (1.0 - y * y); }));
        break;
      case OpKind::kRelu:
        accumulate(n.a, zip(g, nodes_[n.a.index].value,
                            [](double gi, double x) { return x > 0.0 ? gi : 0.0; }));
        break;
      case OpKind::kConcatCols: {
        const std::size_t ca = nodes_[n.a.index].value.cols();
        const std::size_t cb = nodes_[n.b.index].value.cols();
        Tensor2 ga(g.rows(), ca);
        Tensor2 gb(g.rows(), cb);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < ca; ++c) ga(r, c) = g(r, c);
          for (std::size_t c = 0; c < cb; ++c) gb(r, c) = g(r, ca + c);
        }
        accumulate(n.a, ga);
        accumulate(n.b, gb);
        break;
      }
      case OpKind::kRowMean: {
        const Tensor2& va = nodes_[n.a.index].value;
        const double inv = 1.0 / static_cast<double>(va.rows());
        Tensor2 d(va.rows(), va.cols());
        for (std::size_t r = 0; r < va.rows(); ++r) {
          for (std::size_t c = 0; c < va.cols(); ++c) d(r, c) = g(0, c) * inv;
        }
        accumulate(n.a, d);
        break;
      }
      case OpKind::kSumSq: {
        const Tensor2& va = nodes_[n.a.index].value;
        const double s = 2.0 * g(0, 0);
        Tensor2 d(va.rows(), va.cols());
        for (std::size_t i = 0; i < va.size(); ++i) d.data()[i] = s * va.data()[i];
        accumulate(n.a, d);
        break;
      }
      case OpKind::kLayerNormRow: {
        const Tensor2& vx = nodes_[n.a.index].value;
        const Tensor2& gain = nodes_[n.b.index].value;
        const std::size_t cols = vx.cols();
        Tensor2 dx(vx.rows(), cols);
        Tensor2 dgain(1, cols);
        Tensor2 dbias(1, cols);
        if (cols > 0) {
          const double inv_n = 1.0 / static_cast<double>(cols);
          std::vector<double> dxhat(cols);
          for (std::size_t r = 0; r < vx.rows(); ++r) {
            double mean = 0.0;
            for (std::size_t c = 0; c < cols; ++c) mean += vx(r, c);
            mean *= inv_n;
            double var = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = vx(r, c) - mean;
              var += d * d;
            }
            var /= static_cast<double>(cols);
            const bool floored = !(var > kLayerNormVarianceFloor);

            double mean_dxhat = 0.0;
            double mean_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              dxhat[c] = g(r, c) * gain(0, c);
              dgain(0, c) += g(r, c) * n.xhat(r, c);
              dbias(0, c) += g(r, c);
              mean_dxhat += dxhat[c];
              mean_dxhat_xhat += dxhat[c] * n.xhat(r, c);
            }
            mean_dxhat *= inv_n;
            mean_dxhat_xhat *= inv_n;
            const double is = n.inv_std[r];
            for (std::size_t c = 0; c < cols; ++c) {
              double v = dxhat[c] - mean_dxhat;
              if (!floored) v -= n.xhat(r, c) * mean_dxhat_xhat;
              dx(r, c) = is * v;
            }
          }
        }
        accumulate(n.a, dx);
        accumulate(n.b, dgain);
        accumulate(n.c, dbias);
        break;
      }
    }
  }
}

}  // namespace tracegraph
