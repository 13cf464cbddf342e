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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tracegraph/error.hpp"
#include "tracegraph/model.hpp"

namespace tracegraph {
namespace {

using oracle::random_tensor;

ModelConfig linear_cfg(int layers, int in, int hidden) {
  ModelConfig cfg;
  cfg.gcn_layers = layers;
  cfg.input_dim = in;
  cfg.hidden_dim = hidden;
  cfg.activation = Activation::kIdentity;
  cfg.use_residual = false;
  cfg.use_layer_norm = false;
  return cfg;
}

oracle::GruWeights gru_weights(const ModelParams& p) {
  return {p.at("gru.W_r"), p.at("gru.W_z"), p.at("gru.W_h"), p.at("gru.U_r"), p.at("gru.U_z"),
          p.at("gru.U_h"), p.at("gru.b_r"), p.at("gru.b_z"), p.at("gru.b_h")};
}

TEST(Gcn, IdentityWeightsGiveMatrixPower) {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const int layers = 1 + static_cast<int>(rng() % 3);
    const ModelConfig cfg = linear_cfg(layers, 6, 4);
    ModelParams p = ModelParams::initialize(cfg);
    for (int l = 0; l < layers; ++l) p.at("gcn.W." + std::to_string(l)) = Tensor2::identity(4);
    Tensor2 a(5, 5);
    for (double& v : a.data()) v = rng() % 2 ? 1.0 : 0.0;
    const Tensor2 a_hat = normalize_adjacency(a);
    const Tensor2 x = random_tensor(5, 6, rng);
    const std::vector<Tensor2> eye(static_cast<std::size_t>(layers), Tensor2::identity(4));
    EXPECT_LE(max_abs_diff(gcn_forward(a_hat, x, p, cfg),
                           oracle::gcn_linear_oracle(a_hat, x, p.at("input_proj"), eye)),
              1e-10);
  }
}

TEST(Gcn, RandomWeightsMatchLinearOracle) {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    const ModelConfig cfg = linear_cfg(2, 6, 3);
    const ModelParams p = oracle::random_params(cfg, rng);
    Tensor2 a(5, 5);
    for (double& v : a.data()) v = rng() % 2 ? 1.0 : 0.0;
    const Tensor2 a_hat = normalize_adjacency(a);
    const Tensor2 x = random_tensor(5, 6, rng);
    EXPECT_LE(max_abs_diff(gcn_forward(a_hat, x, p, cfg),
                           oracle::gcn_linear_oracle(a_hat, x, p.at("input_proj"),
                                                     {p.at("gcn.W.0"), p.at("gcn.W.1")})),
              1e-10);
  }
}

TEST(Gcn, EmptyGraph) {
  const ModelConfig cfg;
  const Tensor2 h = gcn_forward(Tensor2(0, 0), Tensor2(0, 6), ModelParams::initialize(cfg), cfg);
  EXPECT_EQ(h.rows(), 0u);
  EXPECT_EQ(h.cols(), static_cast<std::size_t>(cfg.hidden_dim));
}

TEST(Gcn, SingleNodeIdentityPropagation) {
  ModelConfig cfg = linear_cfg(1, 2, 2);
  cfg.activation = Activation::kRelu;
  ModelParams p = ModelParams::initialize(cfg);
  p.at("input_proj") = Tensor2::identity(2);
  p.at("gcn.W.0") = Tensor2::identity(2);
  const Tensor2 x = Tensor2::from(1, 2, {0.3, 1.7});
  EXPECT_EQ(gcn_forward(normalize_adjacency(Tensor2(1, 1)), x, p, cfg), x);
}

TEST(Gcn, MutualPairAveragesRows) {
  std::mt19937_64 rng(43);
  const ModelConfig cfg = linear_cfg(1, 2, 2);
  ModelParams p = ModelParams::initialize(cfg);
  p.at("input_proj") = Tensor2::identity(2);
  const Tensor2 w = p.at("gcn.W.0");
  const Tensor2 x = random_tensor(2, 2, rng);
  const Tensor2 h = gcn_forward(Tensor2::from(2, 2, {0.5, 0.5, 0.5, 0.5}), x, p, cfg);
  for (std::size_t c = 0; c < 2; ++c) {
    const double expected = 0.5 * (x(0, 0) + x(1, 0)) * w(0, c) + 0.5 * (x(0, 1) + x(1, 1)) * w(1, c);
    EXPECT_NEAR(h(0, c), expected, 1e-15);
    EXPECT_NEAR(h(1, c), expected, 1e-15);
  }
}

TEST(Gru, AllZeroGivesZero) {
  ModelConfig cfg;
  cfg.gru_hidden = 3;
  ModelParams p = ModelParams::initialize(cfg);
  for (auto& [name, t] : p.tensors) t = Tensor2(t.rows(), t.cols());
  const std::vector<double> z(4, 0.0), h(3, 0.0);
  EXPECT_EQ(gru_step(z, h, p), h);
}

TEST(Gru, SaturatedUpdateGateCopiesState) {
  std::mt19937_64 rng(44);
  ModelConfig cfg;
  cfg.gru_hidden = 5;
  for (int rep = 0; rep < 20; ++rep) {
    ModelParams p = oracle::random_params(cfg, rng);
    p.at("gru.b_z") = Tensor2(1, 5, 1000.0);
    const Tensor2 z = random_tensor(1, 4, rng);
    const Tensor2 h = random_tensor(1, 5, rng);
    EXPECT_EQ(gru_step(z.values(), h.values(), p), h.values());
  }
}

TEST(Gru, MatchesScalarOracle) {
  std::mt19937_64 rng(45);
  for (int rep = 0; rep < 50; ++rep) {
    ModelConfig cfg;
    cfg.gru_hidden = 1 + static_cast<int>(rng() % 6);
    const ModelParams p = oracle::random_params(cfg, rng);
    const Tensor2 z = random_tensor(1, 4, rng, -2, 2);
    const Tensor2 h = random_tensor(1, static_cast<std::size_t>(cfg.gru_hidden), rng);
    const auto got = gru_step(z.values(), h.values(), p);
    const auto want = oracle::gru_step_scalar(z.values(), h.values(), gru_weights(p));
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t j = 0; j < got.size(); ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
  }
}

TEST(Gru, BatchedTapeStepMatchesScalarOraclePerRow) {
  std::mt19937_64 rng(46);
  ModelConfig cfg;
  cfg.gru_hidden = 4;
  const ModelParams p = oracle::random_params(cfg, rng);
  const Tensor2 z = random_tensor(7, 4, rng);
  const Tensor2 h = random_tensor(7, 4, rng);
  Tape t;
  const ParamNodes nodes = bind_params(t, p, false);
  const Tensor2& out = t.value(gru_step(t, t.constant(z), t.constant(h), t.constant(Tensor2(7, 1, 1.0)), nodes));
  for (std::size_t r = 0; r < 7; ++r) {
    const std::vector<double> zr(z.row(r).begin(), z.row(r).end());
    const std::vector<double> hr(h.row(r).begin(), h.row(r).end());
    const auto want = oracle::gru_step_scalar(zr, hr, gru_weights(p));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out(r, j), want[j], 1e-12);
  }
}

// Three services: a-b linked by one edge, c isolated.
ServiceGraph single_edge_graph(int T, std::mt19937_64& rng) {
  ServiceGraph g;
  g.services = {"a", "b", "c"};
  g.X = random_tensor(3, kNodeFeatureDim, rng);
  g.A = Tensor2(3, 3);
  g.A(0, 1) = 1.0;
  EdgeSeries e{0, 1, {}};
  for (int t = 0; t < T; ++t) e.vectors.push_back(random_tensor(1, 4, rng).values());
  g.edge_series.push_back(e);
  return g;
}

TEST(EncodeTemporal, IsolatedNodeZeroAndSingleEdgeFinalState) {
  std::mt19937_64 rng(47);
  ModelConfig cfg;
  cfg.history_T = 3;
  const ModelParams p = oracle::random_params(cfg, rng);
  const ServiceGraph g = single_edge_graph(3, rng);
  const Tensor2 h = encode_temporal(prepare_graph(g, 3), p, cfg);
  std::vector<double> state(static_cast<std::size_t>(cfg.gru_hidden), 0.0);
  for (const auto& z : g.edge_series[0].vectors) {
    state = oracle::gru_step_scalar(z, state, gru_weights(p));
  }
  for (std::size_t j = 0; j < state.size(); ++j) {
    EXPECT_NEAR(h(0, j), state[j], 1e-12);
    EXPECT_NEAR(h(1, j), state[j], 1e-12);
    EXPECT_EQ(h(2, j), 0.0);
  }
}

TEST(EncodeTemporal, OppositeFinalStatesCancel) {
  // With only W_h nonzero the one-step state is 0.5 * tanh(z W_h), odd in z.
  std::mt19937_64 rng(48);
  ModelConfig cfg;
  cfg.history_T = 1;
  ModelParams p = ModelParams::initialize(cfg);
  for (auto& [name, t] : p.tensors) {
    if (name.rfind("gru.", 0) == 0) t = Tensor2(t.rows(), t.cols());
  }
  p.at("gru.W_h") = random_tensor(4, static_cast<std::size_t>(cfg.gru_hidden), rng);
  ServiceGraph g;
  g.services = {"a", "b", "c"};
  g.X = Tensor2(3, kNodeFeatureDim);
  g.A = Tensor2(3, 3);
  g.A(0, 1) = 1.0;
  g.A(2, 1) = 1.0;
  const auto z = random_tensor(1, 4, rng).values();
  std::vector<double> neg(z);
  for (double& v : neg) v = -v;
  g.edge_series = {{0, 1, {z}}, {2, 1, {neg}}};
  const Tensor2 h = encode_temporal(prepare_graph(g, 1), p, cfg);
  for (std::size_t j = 0; j < h.cols(); ++j) {
    EXPECT_NE(h(0, j), 0.0);
    EXPECT_EQ(h(1, j), 0.0);
    EXPECT_EQ(h(2, j), -h(0, j));
  }
}

TEST(Fuse, ShapeAndBlocks) {
  std::mt19937_64 rng(49);
  const Tensor2 s = random_tensor(2, 3, rng);
  const Tensor2 u = fuse(s, Tensor2(2, 2));
  EXPECT_EQ(u.rows(), 2u);
  EXPECT_EQ(u.cols(), 5u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(u(i, c), s(i, c));
    for (std::size_t c = 3; c < 5; ++c) EXPECT_EQ(u(i, c), 0.0);
  }
  EXPECT_THROW(fuse(s, Tensor2(3, 2)), Error);
}

TEST(Fuse, RowPermutationCommutes) {
  std::mt19937_64 rng(50);
  const Tensor2 s = random_tensor(4, 3, rng);
  const Tensor2 t = random_tensor(4, 2, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Tensor2 sp(4, 3), tp(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) sp(i, c) = s(perm[i], c);
    for (std::size_t c = 0; c < 2; ++c) tp(i, c) = t(perm[i], c);
  }
  const Tensor2 u = fuse(s, t);
  const Tensor2 up = fuse(sp, tp);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(up(i, c), u(perm[i], c));
}

TEST(Forward, EmptyGraph) {
  const ModelConfig cfg;
  ServiceGraph g;
  const auto emb = forward(prepare_graph(g, cfg.history_T), ModelParams::initialize(cfg), cfg);
  EXPECT_EQ(emb.u.rows(), 0u);
  EXPECT_EQ(emb.u.cols(), static_cast<std::size_t>(cfg.embedding_dim()));
}

TEST(Forward, ZeroEdgeFeaturesGiveEqualTemporalRows) {
  ModelConfig cfg;
  cfg.history_T = 1;
  ServiceGraph g;
  g.services = {"a", "b", "c"};
  g.X = Tensor2(3, kNodeFeatureDim, 0.5);
  g.A = Tensor2(3, 3);
  g.A(0, 1) = 1.0;
  g.A(1, 2) = 2.0;
  const std::vector<double> zero(4, 0.0);
  g.edge_series = {{0, 1, {zero}}, {1, 2, {zero}}};
  std::mt19937_64 rng(51);
  const ModelParams p = oracle::random_params(cfg, rng);
  const auto emb = forward(prepare_graph(g, 1), p, cfg);
  const auto once = gru_step(zero, std::vector<double>(static_cast<std::size_t>(cfg.gru_hidden), 0.0), p);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < once.size(); ++j) EXPECT_NEAR(emb.h_temp(i, j), once[j], 1e-15);
  EXPECT_EQ(emb.u.cols(), static_cast<std::size_t>(cfg.embedding_dim()));
}

TEST(Forward, DeterministicAndSlicesRecoverBlocks) {
  std::mt19937_64 rng(52);
  const ModelConfig cfg;
  const PreparedGraph g = prepare_graph(oracle::random_service_graph(6, cfg.history_T, rng), cfg.history_T);
  const ModelParams p = ModelParams::initialize(cfg);
  const auto a = forward(g, p, cfg);
  const auto b = forward(g, p, cfg);
  EXPECT_EQ(a.u, b.u);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (std::size_t c = 0; c < a.h_struct.cols(); ++c) EXPECT_EQ(a.u(i, c), a.h_struct(i, c));
    for (std::size_t c = 0; c < a.h_temp.cols(); ++c)
      EXPECT_EQ(a.u(i, a.h_struct.cols() + c), a.h_temp(i, c));
  }
}

PreparedGraph permute(const PreparedGraph& g, const std::vector<std::size_t>& perm) {
  // perm[new] = old
  const std::size_t n = g.node_count();
  std::vector<std::size_t> inv(n);
  for (std::size_t k = 0; k < n; ++k) inv[perm[k]] = k;
  PreparedGraph out = g;
  for (std::size_t i = 0; i < n; ++i) {
    out.services[i] = g.services[perm[i]];
    for (std::size_t j = 0; j < n; ++j) out.adjacency(i, j) = g.adjacency(perm[i], perm[j]);
    for (std::size_t c = 0; c < g.features.cols(); ++c) out.features(i, c) = g.features(perm[i], c);
    for (std::size_t e = 0; e < g.incidence_mean.cols(); ++e)
      out.incidence_mean(i, e) = g.incidence_mean(perm[i], e);
  }
  for (auto& [i, j] : out.edges) {
    i = inv[i];
    j = inv[j];
  }
  return out;
}

TEST(Forward, PermutationEquivariance) {
  std::mt19937_64 rng(53);
  for (int rep = 0; rep < 20; ++rep) {
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.gru_hidden = 4;
    cfg.activation = rep % 2 ? Activation::kTanh : Activation::kRelu;
    const std::size_t n = 2 + rng() % 8;
    const PreparedGraph g = prepare_graph(oracle::random_service_graph(n, cfg.history_T, rng), cfg.history_T);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const ModelParams p = oracle::random_params(cfg, rng);
    const Tensor2 u = forward(g, p, cfg).u;
    const Tensor2 up = forward(permute(g, perm), p, cfg).u;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < u.cols(); ++c) EXPECT_NEAR(up(i, c), u(perm[i], c), 1e-12);
  }
}

TEST(Forward, CompositionGradientFourNodesTwoSteps) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    ModelConfig cfg;
    cfg.hidden_dim = 3;
    cfg.gru_hidden = 2;
    cfg.history_T = 2;
    cfg.activation = seed % 2 ? Activation::kTanh : Activation::kRelu;
    EXPECT_LE(oracle::composition_gradient_error(cfg, 4, 1e-2, seed), 1e-4) << "seed " << seed;
  }
}

TEST(Params, InitializationShapesBoundsAndDeterminism) {
  ModelConfig cfg;
  const ModelParams a = ModelParams::initialize(cfg);
  EXPECT_EQ(a, ModelParams::initialize(cfg));
  a.validate(cfg);
  const Tensor2& w = a.at("input_proj");
  EXPECT_EQ(w.rows(), 6u);
  EXPECT_EQ(w.cols(), 32u);
  const double bound = std::sqrt(6.0 / (6.0 + 32.0));
  for (double v : w.data()) EXPECT_LT(std::abs(v), bound);
  for (double v : a.at("gcn.ln_gain.0").data()) EXPECT_EQ(v, 1.0);
  for (double v : a.at("gru.b_r").data()) EXPECT_EQ(v, 0.0);
  cfg.seed = 8;
  EXPECT_NE(a, ModelParams::initialize(cfg));
}

TEST(Params, ValidateNamesBothDims) {
  ModelConfig cfg;
  const ModelParams p = ModelParams::initialize(cfg);
  cfg.hidden_dim = 16;
  try {
    p.validate(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimension);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("32"), std::string::npos) << msg;
    EXPECT_NE(msg.find("16"), std::string::npos) << msg;
  }
}

TEST(Params, ConfigValidation) {
  ModelConfig cfg;
  cfg.hidden_dim = 0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(activation_from_string("gelu"), Error);
  EXPECT_EQ(activation_from_string("tanh"), Activation::kTanh);
}

TEST(ModelJson, RoundTripIsExact) {
  ModelConfig cfg;
  cfg.activation = Activation::kTanh;
  cfg.use_residual = false;
  WindowConfig window;
  window.history_T = cfg.history_T;
  const ModelParams p = ModelParams::initialize(cfg);
  const std::string text = model_to_json(cfg, window, p.tensors);
  const ModelDocument doc = model_from_json(text);
  EXPECT_EQ(doc.config, cfg);
  EXPECT_EQ(doc.tensors, p.tensors);
  EXPECT_EQ(model_to_json(doc.config, doc.window, doc.tensors), text);
}

}  // namespace
}  // namespace tracegraph
