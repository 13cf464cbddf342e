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

#include "tracegraph/detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tracegraph/error.hpp"
#include "tracegraph/json_writer.hpp"

namespace tracegraph {

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::kConfig, "train.epochs must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorCode::kConfig, "train.learning_rate must be > 0");
  }
  if (!(weight_decay >= 0.0)) {
    throw Error(ErrorCode::kConfig, "train.weight_decay must be >= 0");
  }
  if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0)) {
    throw Error(ErrorCode::kConfig, "train.threshold_quantile must be in (0, 1)");
  }
}

Centroid::Centroid(std::vector<double> mu) : mu_(std::move(mu)) {
  for (double v : mu_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNumeric, "centroid is not finite");
  }
}

Centroid compute_centroid(const std::vector<Tensor2>& embeddings) {
  std::size_t dim = 0;
  std::size_t rows = 0;
  for (const auto& u : embeddings) {
    if (u.rows() == 0) continue;
    if (rows == 0) dim = u.cols();
    if (u.cols() != dim) {
      throw Error(ErrorCode::kDimension,
                  "centroid: embedding width " + std::to_string(u.cols()) +
                      " differs from " + std::to_string(dim));
    }
    rows += u.rows();
  }
  if (rows == 0) {
    throw Error(ErrorCode::kInput, "centroid: all training windows are empty");
  }
  std::vector<double> mu(dim, 0.0);
  for (const auto& u : embeddings) {
    for (std::size_t r = 0; r < u.rows(); ++r) {
      for (std::size_t c = 0; c < dim; ++c) mu[c] += u(r, c);
    }
  }
  for (double& v : mu) v /= static_cast<double>(rows);
  return Centroid(std::move(mu));
}

double node_score(std::span<const double> u, const Centroid& centroid) {
  if (u.size() != centroid.dim()) {
    throw Error(ErrorCode::kDimension,
                "node_score: embedding width " + std::to_string(u.size()) +
                    " vs centroid width " + std::to_string(centroid.dim()));
  }
  double s = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c) {
    const double d = u[c] - centroid.mu()[c];
    s += d * d;
  }
  return s;
}

std::vector<double> node_scores(const Tensor2& u, const Centroid& centroid) {
  std::vector<double> out(u.rows());
  for (std::size_t r = 0; r < u.rows(); ++r) out[r] = node_score(u.row(r), centroid);
  return out;
}

double path_score(const CallPath& path,
                  const std::map<std::string, double>& scores) {
  if (path.services.empty()) {
    throw Error(ErrorCode::kInput, "path_score: empty path");
  }
  double sum = 0.0;
  for (const auto& svc : path.services) {
    auto it = scores.find(svc);
    if (it == scores.end()) {
      throw Error(ErrorCode::kInput, "path_score: service '" + svc +
                                         "' has no score in window " +
                                         std::to_string(path.window_index));
    }
    sum += it->second;
  }
  return sum / static_cast<double>(path.services.size());
}

namespace {

struct ObjectiveNodes {
  NodeId loss;
  NodeId data;
  NodeId reg;
  std::size_t node_count = 0;
};

ObjectiveNodes record_objective(Tape& tape, const std::vector<PreparedGraph>& windows,
                                const ParamNodes& pn, const ModelParams& params,
                                const ModelConfig& cfg, const Centroid& centroid,
                                double weight_decay) {
  const Tensor2 mu = Tensor2::from(1, centroid.dim(), centroid.mu());
  const NodeId mu_node = tape.constant(mu);
  ObjectiveNodes obj{};
  std::optional<NodeId> total;
  for (const auto& g : windows) {
    if (g.node_count() == 0) continue;
    const NodeId u = encode(tape, g, pn, cfg).u;
    const NodeId ones = tape.constant(Tensor2(g.node_count(), 1, 1.0));
    const NodeId s = tape.sum_sq(tape.sub(u, tape.matmul(ones, mu_node)));
    total = total ? tape.add(*total, s) : s;
    obj.node_count += g.node_count();
  }
  if (!total) throw Error(ErrorCode::kInput, "training windows contain no nodes");
  obj.data = tape.scalar_mul(*total, 1.0 / static_cast<double>(obj.node_count));

  std::optional<NodeId> reg;
  for (const auto& [name, _] : params.tensors) {
    const NodeId sq = tape.sum_sq(pn.at(name));
    reg = reg ? tape.add(*reg, sq) : sq;
  }
  obj.reg = reg ? *reg : tape.constant(Tensor2(1, 1, 0.0));
  obj.loss = tape.add(obj.data, tape.scalar_mul(obj.reg, weight_decay));
  return obj;
}

EpochStats stats_of(const Tape& tape, const ObjectiveNodes& obj, int epoch) {
  return EpochStats{epoch, tape.value(obj.loss)(0, 0), tape.value(obj.data)(0, 0),
                    std::sqrt(tape.value(obj.reg)(0, 0))};
}

}  // namespace

EpochStats evaluate_objective(const std::vector<PreparedGraph>& windows,
                              const ModelParams& params, const ModelConfig& cfg,
                              const Centroid& centroid, double weight_decay) {
  Tape tape;
  const auto pn = bind_params(tape, params, false);
  const auto obj = record_objective(tape, windows, pn, params, cfg, centroid,
                                    weight_decay);
  return stats_of(tape, obj, 0);
}

TrainResult train(const std::vector<PreparedGraph>& windows,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  model_cfg.validate();
  train_cfg.validate();
  TrainResult result;
  result.params = ModelParams::initialize(model_cfg);

  std::vector<Tensor2> initial;
  initial.reserve(windows.size());
  for (const auto& g : windows) {
    initial.push_back(forward(g, result.params, model_cfg).u);
  }
  result.centroid = compute_centroid(initial);

  for (int epoch = 0; epoch <= train_cfg.epochs; ++epoch) {
    Tape tape;
    const auto pn = bind_params(tape, result.params, true);
    ObjectiveNodes obj{};
    try {
      obj = record_objective(tape, windows, pn, result.params, model_cfg,
                             result.centroid, train_cfg.weight_decay);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      throw Error(ErrorCode::kNumeric, "training diverged at epoch " +
                                           std::to_string(epoch) + ": " + e.what());
    }
    const EpochStats st = stats_of(tape, obj, epoch);
    if (!std::isfinite(st.loss)) {
      throw Error(ErrorCode::kNumeric,
                  "training diverged at epoch " + std::to_string(epoch));
    }
    result.trace.push_back(st);
    if (epoch == train_cfg.epochs) break;

    tape.backward(obj.loss);
    for (auto& [name, t] : result.params.tensors) {
      const Tensor2& g = tape.grad(pn.at(name));
      auto w = t.data();
      auto d = g.data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= train_cfg.learning_rate * d[i];
      if (!t.all_finite()) {
        throw Error(ErrorCode::kNumeric, "training diverged at epoch " +
                                             std::to_string(epoch) + " (parameter " +
                                             name + ")");
      }
    }
  }
  return result;
}

double select_threshold(std::vector<double> scores, double q) {
  if (scores.empty()) throw Error(ErrorCode::kInput, "select_threshold: no scores");
  if (!(q > 0.0 && q < 1.0)) {
    throw Error(ErrorCode::kConfig, "select_threshold: quantile must be in (0, 1)");
  }
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  // Small slack keeps exact products such as 0.95 * 100 from rounding up.
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, scores.size());
  return scores[rank - 1];
}

bool ranks_before(const RankedPath& a, const RankedPath& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.path.services.size() != b.path.services.size()) {
    return a.path.services.size() < b.path.services.size();
  }
  return a.path.services < b.path.services;
}

std::vector<RankedPath> rank_paths(const std::vector<CallPath>& paths,
                                   const std::map<std::string, double>& scores,
                                   std::size_t top_k) {
  std::set<std::vector<std::string>> seen;
  std::vector<RankedPath> ranked;
  for (const auto& p : paths) {
    if (!seen.insert(p.services).second) continue;
    ranked.push_back(RankedPath{p, path_score(p, scores)});
  }
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

ScoreReport score_window(const PreparedGraph& graph, const Detector& detector) {
  ScoreReport report;
  report.window_index = graph.window_index;
  report.threshold = detector.threshold;
  const auto emb = forward(graph, detector.params, detector.model);
  const auto scores = node_scores(emb.u, detector.centroid);
  for (std::size_t i = 0; i < graph.services.size(); ++i) {
    report.node_scores[graph.services[i]] = scores[i];
    if (scores[i] > detector.threshold) report.flagged_nodes.push_back(graph.services[i]);
  }
  return report;
}

ScoreReport trace_root_cause(const PreparedGraph& graph,
                             const std::vector<TraceTree>& trees,
                             const Detector& detector, std::size_t top_k) {
  ScoreReport report = score_window(graph, detector);
  if (top_k == 0) return report;
  std::vector<CallPath> paths;
  for (const auto& t : trees) {
    auto ps = extract_call_paths(t, graph.window_index);
    paths.insert(paths.end(), std::make_move_iterator(ps.begin()),
                 std::make_move_iterator(ps.end()));
  }
  report.ranked_paths = rank_paths(paths, report.node_scores, top_k);
  return report;
}

namespace {

constexpr const char* kCentroidTensor = "detector.centroid";
constexpr const char* kThresholdTensor = "detector.threshold";

template <std::size_t N>
Tensor2 row_tensor(const std::array<double, N>& a) {
  return Tensor2::from(1, N, std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> row_array(const Tensor2& t, const std::string& name) {
  if (t.rows() != 1 || t.cols() != N) {
    throw Error(ErrorCode::kDimension, "tensor " + name + " is " + t.shape_string() +
                                           ", expected 1x" + std::to_string(N));
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = t(0, i);
  return out;
}

}  // namespace

std::string Detector::to_json() const {
  std::map<std::string, Tensor2> tensors = params.tensors;
  tensors[kCentroidTensor] = Tensor2::from(1, centroid.dim(), centroid.mu());
  tensors[kThresholdTensor] = Tensor2(1, 1, threshold);
  if (stats) {
    tensors["stats.node_mean"] = row_tensor(stats->node_mean);
    tensors["stats.node_std"] = row_tensor(stats->node_std);
    tensors["stats.edge_mean"] = row_tensor(stats->edge_mean);
    tensors["stats.edge_std"] = row_tensor(stats->edge_std);
  }
  return model_to_json(model, window, tensors);
}

Detector Detector::from_json(const std::string& text) {
  ModelDocument doc = model_from_json(text);
  Detector d;
  d.model = doc.config;
  d.window = doc.window;
  if (d.model.history_T != d.window.history_T) {
    throw Error(ErrorCode::kConfig,
                "model history_T " + std::to_string(d.model.history_T) +
                    " differs from window history_T " +
                    std::to_string(d.window.history_T));
  }
  FeatureStats st;
  int stats_found = 0;
  for (auto& [name, t] : doc.tensors) {
    if (name == kCentroidTensor) {
      d.centroid = Centroid(t.values());
    } else if (name == kThresholdTensor) {
      if (t.size() != 1) throw Error(ErrorCode::kDimension, "threshold must be 1x1");
      d.threshold = t(0, 0);
    } else if (name == "stats.node_mean") {
      st.node_mean = row_array<kNodeFeatureDim>(t, name), ++stats_found;
    } else if (name == "stats.node_std") {
      st.node_std = row_array<kNodeFeatureDim>(t, name), ++stats_found;
    } else if (name == "stats.edge_mean") {
      st.edge_mean = row_array<kEdgeFeatureDim>(t, name), ++stats_found;
    } else if (name == "stats.edge_std") {
      st.edge_std = row_array<kEdgeFeatureDim>(t, name), ++stats_found;
    } else {
      d.params.tensors[name] = std::move(t);
    }
  }
  if (stats_found == 4) {
    d.stats = st;
  } else if (stats_found != 0) {
    throw Error(ErrorCode::kInput, "model has incomplete feature stats");
  }
  d.params.validate(d.model);
  if (d.centroid.dim() != static_cast<std::size_t>(d.model.embedding_dim())) {
    throw Error(ErrorCode::kDimension,
                "centroid width " + std::to_string(d.centroid.dim()) +
                    " does not match model embedding dim " +
                    std::to_string(d.model.embedding_dim()));
  }
  return d;
}

std::string reports_to_json(const std::vector<ScoreReport>& reports) {
  JsonWriter w;
  w.begin_object();
  w.key("reports").begin_array();
  for (const auto& r : reports) {
    w.begin_object();
    w.key("window_index").value(r.window_index);
    w.key("threshold").value(r.threshold);
    w.key("node_scores").begin_object();
    for (const auto& [svc, s] : r.node_scores) w.key(svc).value(s);
    w.end_object();
    w.key("flagged_nodes").array(std::span<const std::string>(r.flagged_nodes));
    w.key("ranked_paths").begin_array();
    for (const auto& p : r.ranked_paths) {
      w.begin_object();
      w.key("services").array(std::span<const std::string>(p.path.services));
      w.key("span_ids").array(std::span<const std::string>(p.path.span_ids));
      w.key("score").value(p.score);
      w.end_object();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

void write_training_trace_csv(std::ostream& out,
                              const std::vector<EpochStats>& trace) {
  out << "epoch,loss,mean_score,weight_norm\n";
  for (const auto& e : trace) {
    out << e.epoch << ',' << format_double(e.loss) << ','
        << format_double(e.mean_score) << ',' << format_double(e.weight_norm)
        << '\n';
  }
}

}  // namespace tracegraph
