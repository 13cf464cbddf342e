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
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tracegraph/model.hpp"
#include "tracegraph/service_graph.hpp"
#include "tracegraph/trace_tree.hpp"

namespace tracegraph {

struct TrainConfig {
  int epochs = 60;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double threshold_quantile = 0.99;

  void validate() const;
};

/// Center of the normal embeddings. Built once from training windows and
/// immutable afterwards.
class Centroid {
 public:
  Centroid() = default;
  explicit Centroid(std::vector<double> mu);

  const std::vector<double>& mu() const noexcept { return mu_; }
  std::size_t dim() const noexcept { return mu_.size(); }
  bool frozen() const noexcept { return !mu_.empty(); }

  bool operator==(const Centroid&) const = default;

 private:
  std::vector<double> mu_;
};

/// Mean of all node rows over all windows; throws when every window is empty.
Centroid compute_centroid(const std::vector<Tensor2>& embeddings);

/// Squared Euclidean distance to the centroid.
double node_score(std::span<const double> u, const Centroid& centroid);
std::vector<double> node_scores(const Tensor2& u, const Centroid& centroid);

/// Mean node score along the path; a service visited twice counts twice.
double path_score(const CallPath& path,
                  const std::map<std::string, double>& scores);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double mean_score = 0.0;
  double weight_norm = 0.0;
};

struct TrainResult {
  ModelParams params;
  Centroid centroid;
  std::vector<EpochStats> trace;  // row e: state after e updates, e = 0..epochs
};

/// One-class training: the centroid is fixed from the initial forward pass,
/// then full-batch gradient descent minimizes mean node score plus
/// weight_decay * sum of squared entries of every learnable tensor.
TrainResult train(const std::vector<PreparedGraph>& windows,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg);

/// Loss of `params` on `windows` against a fixed centroid (same objective as
/// train, evaluated once).
EpochStats evaluate_objective(const std::vector<PreparedGraph>& windows,
                              const ModelParams& params, const ModelConfig& cfg,
                              const Centroid& centroid, double weight_decay);

/// Nearest-rank quantile: the ceil(q * n)-th smallest score.
double select_threshold(std::vector<double> scores, double q);

struct RankedPath {
  CallPath path;
  double score = 0.0;
};

/// Orders by score descending, then shorter path, then lexicographic services.
bool ranks_before(const RankedPath& a, const RankedPath& b);

/// Deduplicates by service sequence (first occurrence wins), scores and
/// sorts, and keeps the first top_k.
std::vector<RankedPath> rank_paths(const std::vector<CallPath>& paths,
                                   const std::map<std::string, double>& scores,
                                   std::size_t top_k);

struct ScoreReport {
  std::int64_t window_index = 0;
  std::map<std::string, double> node_scores;
  double threshold = 0.0;
  std::vector<std::string> flagged_nodes;
  std::vector<RankedPath> ranked_paths;
};

/// Trained detector state persisted as model.json.
struct Detector {
  ModelConfig model;
  WindowConfig window;
  ModelParams params;
  Centroid centroid;
  double threshold = 0.0;
  std::optional<FeatureStats> stats;

  std::string to_json() const;
  /// Validates tensor shapes against the stored config.
  static Detector from_json(const std::string& text);
};

/// Node scores and verdicts for one window; no paths.
ScoreReport score_window(const PreparedGraph& graph, const Detector& detector);

/// Scores the window and ranks the call paths of its traces.
ScoreReport trace_root_cause(const PreparedGraph& graph,
                             const std::vector<TraceTree>& trees,
                             const Detector& detector, std::size_t top_k);

std::string reports_to_json(const std::vector<ScoreReport>& reports);
void write_training_trace_csv(std::ostream& out,
                              const std::vector<EpochStats>& trace);

}  // namespace tracegraph
