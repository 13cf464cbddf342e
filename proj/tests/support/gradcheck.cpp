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

#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oracles.hpp"

namespace tracegraph::oracle {

const std::vector<OpKind>& differentiable_ops() {
  static const std::vector<OpKind> ops{
      OpKind::kMatmul,  OpKind::kAdd,        OpKind::kSub,     OpKind::kHadamard,
      OpKind::kScalarMul, OpKind::kSigmoid,  OpKind::kTanh,    OpKind::kRelu,
      OpKind::kConcatCols, OpKind::kRowMean, OpKind::kSumSq,   OpKind::kLayerNormRow};
  return ops;
}

namespace {

struct Instance {
  std::vector<Tensor2> inputs;
  double scalar = 0.0;
};

std::size_t dim(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Entries bounded away from the relu kink so central differences stay on one side.
Tensor2 away_from_zero(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Tensor2 t = random_tensor(r, c, rng);
  for (double& v : t.data()) {
    if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
  }
  return t;
}

Instance make_instance(OpKind op, std::mt19937_64& rng) {
  const std::size_t r = dim(rng, 1, 4);
  const std::size_t c = dim(rng, 2, 4);
  Instance in;
  switch (op) {
    case OpKind::kMatmul: {
      const std::size_t k = dim(rng, 1, 4);
      in.inputs = {random_tensor(r, k, rng), random_tensor(k, c, rng)};
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kHadamard:
      in.inputs = {random_tensor(r, c, rng), random_tensor(r, c, rng)};
      break;
    case OpKind::kScalarMul:
      in.inputs = {random_tensor(r, c, rng)};
      in.scalar = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
      break;
    case OpKind::kSigmoid:
    case OpKind::kTanh:
    case OpKind::kRowMean:
    case OpKind::kSumSq:
      in.inputs = {random_tensor(r, c, rng, -2.0, 2.0)};
      break;
    case OpKind::kRelu:
      in.inputs = {away_from_zero(r, c, rng)};
      break;
    case OpKind::kConcatCols:
      in.inputs = {random_tensor(r, c, rng), random_tensor(r, dim(rng, 1, 3), rng)};
      break;
    case OpKind::kLayerNormRow:
      in.inputs = {random_tensor(r, c, rng, -2.0, 2.0), random_tensor(1, c, rng, 0.5, 1.5),
                   random_tensor(1, c, rng)};
      break;
    default:
      throw std::invalid_argument("not a differentiable op");
  }
  return in;
}

NodeId apply(Tape& t, OpKind op, const std::vector<NodeId>& x, double scalar) {
  switch (op) {
    case OpKind::kMatmul: return t.matmul(x[0], x[1]);
    case OpKind::kAdd: return t.add(x[0], x[1]);
    case OpKind::kSub: return t.sub(x[0], x[1]);
    case OpKind::kHadamard: return t.hadamard(x[0], x[1]);
    case OpKind::kScalarMul: return t.scalar_mul(x[0], scalar);
    case OpKind::kSigmoid: return t.sigmoid(x[0]);
    case OpKind::kTanh: return t.tanh(x[0]);
    case OpKind::kRelu: return t.relu(x[0]);
    case OpKind::kConcatCols: return t.concat_cols(x[0], x[1]);
    case OpKind::kRowMean: return t.row_mean(x[0]);
    case OpKind::kSumSq: return t.sum_sq(x[0]);
    case OpKind::kLayerNormRow: return t.layer_norm_row(x[0], x[1], x[2]);
    default: throw std::invalid_argument("not a differentiable op");
  }
}

// sum(out * proj) on the tape: row_mean, then a ones column, then rescale.
NodeId projected_loss(Tape& t, NodeId out, const Tensor2& proj) {
  // Copy the shape: appending nodes may move the tape's storage.
  const std::size_t rows = t.value(out).rows();
  const std::size_t cols = t.value(out).cols();
  const NodeId weighted = t.hadamard(out, t.constant(proj));
  const NodeId col_means = t.row_mean(weighted);
  const NodeId total = t.matmul(col_means, t.constant(Tensor2(cols, 1, 1.0)));
  return t.scalar_mul(total, static_cast<double>(rows));
}

}  // namespace

double op_gradient_error(OpKind op, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Instance in = make_instance(op, rng);

  Tensor2 proj;
  {
    Tape probe;
    std::vector<NodeId> ids;
    for (const auto& x : in.inputs) ids.push_back(probe.constant(x));
    const Tensor2& out = probe.value(apply(probe, op, ids, in.scalar));
    proj = random_tensor(out.rows(), out.cols(), rng);
  }

  Tape tape;
  std::vector<NodeId> leaves;
  for (const auto& x : in.inputs) leaves.push_back(tape.parameter(x));
  tape.backward(projected_loss(tape, apply(tape, op, leaves, in.scalar), proj));
  std::vector<Tensor2> analytic;
  for (NodeId id : leaves) analytic.push_back(tape.grad(id));

  auto f = [&](const std::vector<Tensor2>& xs) {
    Tape t;
    std::vector<NodeId> ids;
    for (const auto& x : xs) ids.push_back(t.constant(x));
    return project(t.value(apply(t, op, ids, in.scalar)), proj);
  };
  return max_fd_error(f, in.inputs, analytic);
}

ServiceGraph random_service_graph(std::size_t n, int history_T, std::mt19937_64& rng,
                                  double edge_prob) {
  ServiceGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.services.push_back("svc-" + std::string(1, static_cast<char>('a' + i % 26)) +
                         std::to_string(i / 26));
  }
  std::sort(g.services.begin(), g.services.end());
  g.X = random_tensor(n, kNodeFeatureDim, rng);
  g.A = Tensor2(n, n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || u(rng) >= edge_prob) continue;
      g.A(i, j) = static_cast<double>(1 + rng() % 5);
      EdgeSeries e{i, j, {}};
      for (int t = 0; t < history_T; ++t) {
        const Tensor2 v = random_tensor(1, kEdgeFeatureDim, rng);
        e.vectors.emplace_back(v.values());
      }
      g.edge_series.push_back(std::move(e));
    }
  }
  return g;
}

ModelParams random_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  ModelParams p = ModelParams::initialize(cfg);
  for (auto& [name, t] : p.tensors) t = random_tensor(t.rows(), t.cols(), rng, -0.5, 0.5);
  return p;
}

double composition_gradient_error(const ModelConfig& cfg, std::size_t n,
                                  double weight_decay, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const PreparedGraph g = prepare_graph(random_service_graph(n, cfg.history_T, rng, 0.5),
                                        cfg.history_T);
  const ModelParams params = random_params(cfg, rng);
  const Tensor2 mu_row = random_tensor(1, static_cast<std::size_t>(cfg.embedding_dim()), rng);
  const std::vector<double> mu = mu_row.values();

  Tape tape;
  const ParamNodes p = bind_params(tape, params, true);
  const EncodedNodes enc = encode(tape, g, p, cfg);
  const NodeId centre = tape.matmul(tape.constant(Tensor2(n, 1, 1.0)), tape.constant(mu_row));
  NodeId loss = tape.scalar_mul(tape.sum_sq(tape.sub(enc.u, centre)),
                                1.0 / static_cast<double>(n));
  for (const auto& [name, id] : p) {
    loss = tape.add(loss, tape.scalar_mul(tape.sum_sq(id), weight_decay));
  }
  tape.backward(loss);

  std::vector<std::string> names;
  std::vector<Tensor2> inputs, analytic;
  for (const auto& [name, t] : params.tensors) {
    names.push_back(name);
    inputs.push_back(t);
    analytic.push_back(tape.grad(p.at(name)));
  }

  auto f = [&](const std::vector<Tensor2>& xs) {
    ModelParams q;
    for (std::size_t k = 0; k < names.size(); ++k) q.tensors[names[k]] = xs[k];
    const Tensor2 u = forward(g, q, cfg).u;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += squared_distance(u, i, mu);
    s /= static_cast<double>(n);
    double reg = 0.0;
    for (const auto& x : xs) {
      for (double v : x.data()) reg += v * v;
    }
    return s + weight_decay * reg;
  };
  return max_fd_error(f, inputs, analytic);
}

}  // namespace tracegraph::oracle
