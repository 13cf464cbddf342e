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
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tracegraph/detector.hpp"
#include "tracegraph/error.hpp"
#include "tracegraph/pipeline.hpp"
#include "tracegraph/synth.hpp"

namespace tracegraph {
namespace {

using oracle::make_span;

struct SmallWorkload {
  Topology topology;
  std::vector<SpanRecord> spans;
  WindowConfig window;
  GraphBuild build;
  std::vector<PreparedGraph> prepared;
};

SmallWorkload small_workload(int n_services, int n_windows, std::uint64_t seed) {
  SmallWorkload w;
  w.topology = generate_topology({.n_services = n_services, .edge_density = 0.2, .max_depth = 3,
                                  .seed = seed});
  w.window.window_length_us = 1'000'000;
  w.window.history_T = 2;
  TraceWorkload load{.rate = 30, .n_windows = n_windows,
                     .window_length_us = w.window.window_length_us, .seed = seed + 1};
  w.spans = generate_traces(w.topology, load);
  w.build = build_graphs(w.spans, w.window, WindowRange{0, n_windows - 1});
  w.prepared = prepare_windows(w.build.graphs, w.window, std::nullopt);
  return w;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.hidden_dim = 8;
  cfg.gru_hidden = 4;
  cfg.history_T = 2;
  return cfg;
}

TEST(Centroid, HandMeans) {
  const auto v = Tensor2::from(3, 2, {1, 2, 1, 2, 1, 2});
  EXPECT_EQ(compute_centroid({v}).mu(), (std::vector<double>{1, 2}));
  EXPECT_EQ(compute_centroid({Tensor2::from(1, 2, {0, 0}), Tensor2::from(1, 2, {2, 2})}).mu(),
            (std::vector<double>{1, 1}));
  const auto one = Tensor2::from(1, 3, {0.5, -1, 4});
  const Centroid c = compute_centroid({Tensor2(0, 3), one});
  EXPECT_EQ(node_score(one.row(0), c), 0.0);
  EXPECT_THROW(compute_centroid({Tensor2(0, 3)}), Error);
}

TEST(NodeScore, HandValuesAndHomogeneity) {
  const Centroid c({1.0, 1.0, 1.0, 1.0});
  const std::vector<double> u{4.0, 5.0, 1.0, 1.0};
  EXPECT_EQ(node_score(u, c), 25.0);
  EXPECT_EQ(node_score(c.mu(), c), 0.0);
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 50; ++rep) {
    const auto mu = oracle::random_tensor(1, 6, rng).values();
    const auto d = oracle::random_tensor(1, 6, rng).values();
    std::vector<double> u1(6), u2(6);
    for (std::size_t k = 0; k < 6; ++k) {
      u1[k] = mu[k] + d[k];
      u2[k] = mu[k] + 2.0 * d[k];
    }
    const double s1 = node_score(u1, Centroid(mu));
    EXPECT_GE(s1, 0.0);
    EXPECT_NEAR(node_score(u2, Centroid(mu)), 4.0 * s1, 1e-12);
  }
  EXPECT_THROW(node_score(std::vector<double>{1.0}, c), Error);
}

TEST(NodeScore, MatchesScalarLoop) {
  std::mt19937_64 rng(62);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor2 u = oracle::random_tensor(1 + rng() % 8, 5, rng, -3, 3);
    const auto mu = oracle::random_tensor(1, 5, rng).values();
    const auto scores = node_scores(u, Centroid(mu));
    for (std::size_t i = 0; i < u.rows(); ++i) {
      EXPECT_NEAR(scores[i], oracle::squared_distance(u, i, mu), 1e-12);
    }
  }
}

CallPath path_of(std::vector<std::string> services) {
  CallPath p;
  p.services = std::move(services);
  return p;
}

TEST(PathScore, HandValues) {
  const std::map<std::string, double> s{{"a", 1}, {"b", 2}, {"c", 3}, {"z", 0}};
  EXPECT_EQ(path_score(path_of({"b"}), s), 2.0);
  EXPECT_EQ(path_score(path_of({"a", "b", "c"}), s), 2.0);
  EXPECT_EQ(path_score(path_of({"z", "z"}), s), 0.0);
  // Repeated services count per position.
  EXPECT_EQ(path_score(path_of({"a", "c", "c"}), s), 7.0 / 3.0);
  EXPECT_THROW(path_score(path_of({"missing"}), s), Error);
}

TEST(PathScore, BoundedByNodeScores) {
  std::mt19937_64 rng(63);
  std::map<std::string, double> s;
  for (int k = 0; k < 6; ++k) s["s" + std::to_string(k)] = oracle::random_tensor(1, 1, rng, 0, 10)(0, 0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::string> svc;
    for (std::size_t k = 0, len = 1 + rng() % 6; k < len; ++k) svc.push_back("s" + std::to_string(rng() % 6));
    double lo = 1e300, hi = -1e300;
    for (const auto& x : svc) {
      lo = std::min(lo, s[x]);
      hi = std::max(hi, s[x]);
    }
    const double v = path_score(path_of(svc), s);
    EXPECT_GE(v, lo - 1e-12);
    EXPECT_LE(v, hi + 1e-12);
  }
}

TEST(Threshold, NearestRank) {
  EXPECT_EQ(select_threshold(std::vector<double>(10, 0.0), 0.99), 0.0);
  std::vector<double> hundred(100);
  for (int k = 0; k < 100; ++k) hundred[k] = 100 - k;
  EXPECT_EQ(select_threshold(hundred, 0.95), 95.0);
  EXPECT_EQ(select_threshold({3, 1, 2}, 0.5), 2.0);
  EXPECT_THROW(select_threshold({}, 0.5), Error);
  EXPECT_THROW(select_threshold({1.0}, 1.0), Error);
}

TEST(RankPaths, TieRuleDedupAndTopK) {
  const std::map<std::string, double> s{{"a", 2}, {"b", 2}, {"c", 1}, {"d", 3}};
  const std::vector<CallPath> paths{path_of({"a", "b"}), path_of({"a"}), path_of({"a", "b"}),
                                    path_of({"c", "d"}), path_of({"b"})};
  const auto ranked = rank_paths(paths, s, 10);
  ASSERT_EQ(ranked.size(), 4u);
  EXPECT_EQ(ranked[0].path.services, std::vector<std::string>{"a"});
  EXPECT_EQ(ranked[1].path.services, std::vector<std::string>{"b"});
  EXPECT_EQ(ranked[2].path.services, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ranked[3].path.services, (std::vector<std::string>{"c", "d"}));
  EXPECT_EQ(rank_paths(paths, s, 2).size(), 2u);
}

std::vector<TraceTree> random_trees(std::mt19937_64& rng, int n_trees, int n_services) {
  std::vector<TraceTree> trees;
  for (int t = 0; t < n_trees; ++t) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<SpanRecord> spans;
    for (int k = 0; k < n; ++k) {
      std::optional<std::string> parent;
      if (k > 0) parent = "s" + std::to_string(rng() % k);
      spans.push_back(make_span("t" + std::to_string(t), "s" + std::to_string(k), parent,
                                "svc" + std::to_string(rng() % n_services), k, 1));
    }
    trees.push_back(build_trace_tree(spans));
  }
  return trees;
}

std::vector<CallPath> all_paths(const std::vector<TraceTree>& trees) {
  std::vector<CallPath> out;
  for (const auto& t : trees) {
    auto p = extract_call_paths(t);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

TEST(RankPaths, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(64);
  for (int rep = 0; rep < 50; ++rep) {
    const auto trees = random_trees(rng, 1 + static_cast<int>(rng() % 10), 5);
    std::map<std::string, double> s;
    for (int k = 0; k < 5; ++k) {
      // Coarse values make score ties common.
      s["svc" + std::to_string(k)] = static_cast<double>(rng() % 3);
    }
    const auto paths = all_paths(trees);
    const auto want = oracle::exhaustive_ranking(trees, s);
    ASSERT_LE(want.size(), 50u);
    const auto got = rank_paths(paths, s, 1000);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].path.services, want[k].services);
      EXPECT_NEAR(got[k].score, want[k].score, 1e-12);
    }
  }
}

TEST(RankPaths, ShiftingScoresShiftsPathScoresAndKeepsOrder) {
  std::mt19937_64 rng(65);
  for (int rep = 0; rep < 30; ++rep) {
    const auto paths = all_paths(random_trees(rng, 6, 5));
    std::map<std::string, double> s, shifted;
    for (int k = 0; k < 5; ++k) {
      // Dyadic values keep every path sum exact, so ties survive the shift.
      const double v = static_cast<double>(rng() % 20) / 4.0;
      s["svc" + std::to_string(k)] = v;
      shifted["svc" + std::to_string(k)] = v + 3.0;
    }
    const auto a = rank_paths(paths, s, 1000);
    const auto b = rank_paths(paths, shifted, 1000);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].path.services, b[k].path.services);
      EXPECT_NEAR(b[k].score, a[k].score + 3.0, 1e-12);
    }
  }
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  const auto w = small_workload(6, 4, 5);
  const ModelConfig cfg = small_model();
  const TrainResult r = train(w.prepared, cfg, {.epochs = 0});
  EXPECT_EQ(r.params, ModelParams::initialize(cfg));
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_TRUE(r.centroid.frozen());
}

// With no weight decay and no updates the reported loss is the scalar-loop
// mean squared distance to the centroid of the initial embeddings.
TEST(Train, ZeroDecayLossMatchesScalarLoop) {
  const auto w = small_workload(6, 4, 6);
  const ModelConfig cfg = small_model();
  const TrainResult r = train(w.prepared, cfg, {.epochs = 0, .weight_decay = 0.0});
  std::vector<Tensor2> us;
  for (const auto& g : w.prepared) us.push_back(forward(g, r.params, cfg).u);
  const auto mu = oracle::mean_rows(us);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& u : us) {
    for (std::size_t i = 0; i < u.rows(); ++i, ++n) sum += oracle::squared_distance(u, i, mu);
  }
  EXPECT_NEAR(r.trace[0].loss, sum / static_cast<double>(n), 1e-12);
  for (std::size_t c = 0; c < mu.size(); ++c) EXPECT_NEAR(r.centroid.mu()[c], mu[c], 1e-12);
}

TEST(Train, ZeroDecayLossEqualsMeanScoreEveryEpoch) {
  const auto w = small_workload(6, 4, 7);
  const TrainResult r = train(w.prepared, small_model(),
                              {.epochs = 5, .learning_rate = 0.05, .weight_decay = 0.0});
  ASSERT_EQ(r.trace.size(), 6u);
  for (const auto& e : r.trace) EXPECT_EQ(e.loss, e.mean_score);
}

TEST(Train, TenEpochsReduceMeanScore) {
  const auto w = small_workload(8, 6, 7);
  ModelConfig cfg = small_model();
  cfg.seed = 7;
  const TrainResult r = train(w.prepared, cfg, {.epochs = 10, .learning_rate = 0.01});
  EXPECT_LT(r.trace.back().mean_score, r.trace.front().mean_score);
  const EpochStats again = evaluate_objective(w.prepared, r.params, cfg, r.centroid, 1e-4);
  EXPECT_NEAR(again.loss, r.trace.back().loss, 1e-12);
}

TEST(Train, Deterministic) {
  const auto w = small_workload(6, 4, 8);
  const TrainConfig tc{.epochs = 3, .learning_rate = 0.05};
  const TrainResult a = train(w.prepared, small_model(), tc);
  const TrainResult b = train(w.prepared, small_model(), tc);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.centroid, b.centroid);
}

Detector fitted(const SmallWorkload& w, const ModelConfig& cfg, int epochs) {
  const TrainResult r = train(w.prepared, cfg, {.epochs = epochs, .learning_rate = 0.05});
  Detector d;
  d.model = cfg;
  d.window = w.window;
  d.params = r.params;
  d.centroid = r.centroid;
  std::vector<double> scores;
  for (const auto& g : w.prepared) {
    const auto s = node_scores(forward(g, r.params, cfg).u, r.centroid);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  d.threshold = select_threshold(scores, 0.99);
  return d;
}

TEST(TraceRootCause, NoTreesStillScoresNodes) {
  const auto w = small_workload(6, 4, 9);
  const Detector d = fitted(w, small_model(), 0);
  const auto report = trace_root_cause(w.prepared[1], {}, d, 5);
  EXPECT_TRUE(report.ranked_paths.empty());
  EXPECT_EQ(report.node_scores.size(), w.prepared[1].node_count());
}

TEST(TraceRootCause, MatchesExhaustiveOracleOnSyntheticWindow) {
  const auto w = small_workload(6, 4, 10);
  const Detector d = fitted(w, small_model(), 2);
  for (std::int64_t k = 0; k < 4; ++k) {
    const auto& trees = w.build.trees.at(k);
    const auto report = trace_root_cause(w.prepared[static_cast<std::size_t>(k)], trees, d, 1000);
    const auto want = oracle::exhaustive_ranking(trees, report.node_scores);
    ASSERT_EQ(report.ranked_paths.size(), want.size());
    for (std::size_t p = 0; p < want.size(); ++p) {
      EXPECT_EQ(report.ranked_paths[p].path.services, want[p].services);
      EXPECT_NEAR(report.ranked_paths[p].score, want[p].score, 1e-12);
    }
    const auto emb = forward(w.prepared[static_cast<std::size_t>(k)], d.params, d.model);
    const auto& services = w.prepared[static_cast<std::size_t>(k)].services;
    for (std::size_t i = 0; i < services.size(); ++i) {
      EXPECT_NEAR(report.node_scores.at(services[i]),
                  oracle::squared_distance(emb.u, i, d.centroid.mu()), 1e-12);
    }
  }
}

// Five services; a latency spike on a service reached by a unique path puts
// that path on top.
TEST(TraceRootCause, InjectedServicePathRanksFirst) {
  const Topology topo = generate_topology({.n_services = 5, .edge_density = 1e-9, .max_depth = 4, .seed = 3});
  WindowConfig window;
  window.window_length_us = 1'000'000;
  window.history_T = 2;
  const int n_windows = 8;
  const auto spans = generate_traces(topo, {.rate = 40, .n_windows = n_windows,
                                            .window_length_us = window.window_length_us, .seed = 11});
  // Deepest service: a tree topology gives it exactly one root path.
  std::size_t target = 0;
  for (std::size_t s = 0; s < topo.services.size(); ++s) {
    if (topo.depth[s] > topo.depth[target]) target = s;
  }
  AnomalySpec spec;
  spec.target = topo.services[target];
  spec.magnitude = 20.0;
  spec.affected_windows = {n_windows - 1};
  const auto injected = inject_anomaly(spans, topo, spec, window.window_length_us);
  const auto build = build_graphs(injected.spans, window, WindowRange{0, n_windows - 1});
  ASSERT_TRUE(build.errors.empty());
  std::vector<ServiceGraph> train_raw(build.graphs.begin(), build.graphs.end() - 1);
  const auto stats = standardize_features(train_raw, std::nullopt).stats;
  const auto prepared = prepare_windows(build.graphs, window, stats);

  ModelConfig cfg = small_model();
  const std::vector<PreparedGraph> train_set(prepared.begin(), prepared.end() - 1);
  const TrainResult r = train(train_set, cfg, {.epochs = 20, .learning_rate = 0.05});
  Detector d;
  d.model = cfg;
  d.window = window;
  d.params = r.params;
  d.centroid = r.centroid;
  const auto report = trace_root_cause(prepared.back(), build.trees.at(n_windows - 1), d, 3);
  ASSERT_FALSE(report.ranked_paths.empty());
  const auto& top = report.ranked_paths[0].path.services;
  EXPECT_EQ(top.back(), spec.target);
}

TEST(DetectorJson, RoundTrip) {
  const auto w = small_workload(6, 4, 12);
  Detector d = fitted(w, small_model(), 1);
  d.stats = standardize_features(w.build.graphs, std::nullopt).stats;
  const std::string text = d.to_json();
  const Detector back = Detector::from_json(text);
  EXPECT_EQ(back.params, d.params);
  EXPECT_EQ(back.centroid, d.centroid);
  EXPECT_EQ(back.threshold, d.threshold);
  EXPECT_EQ(back.stats, d.stats);
  EXPECT_EQ(back.to_json(), text);
}

TEST(ScoreWindow, FlagsNodesAboveThreshold) {
  const auto w = small_workload(6, 4, 13);
  Detector d = fitted(w, small_model(), 0);
  d.threshold = -1.0;
  const auto report = score_window(w.prepared[0], d);
  EXPECT_EQ(report.flagged_nodes.size(), w.prepared[0].node_count());
  d.threshold = 1e300;
  EXPECT_TRUE(score_window(w.prepared[0], d).flagged_nodes.empty());
}

}  // namespace
}  // namespace tracegraph
