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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracegraph/tensor.hpp"
#include "tracegraph/trace_tree.hpp"

namespace tracegraph {

// Node feature columns.
inline constexpr std::size_t kNodeFeatureDim = 6;
enum NodeFeature : std::size_t {
  kMeanLatencyUs = 0,
  kP95LatencyUs = 1,
  kErrorRate = 2,
  kThroughputRps = 3,
  kFanInDegree = 4,
  kFanOutDegree = 5,
};

// Edge feature components.
inline constexpr std::size_t kEdgeFeatureDim = 4;
enum EdgeFeature : std::size_t {
  kCallCount = 0,
  kMeanEdgeLatencyUs = 1,
  kRetryCount = 2,
  kTimeoutCount = 3,
};

enum class Standardization { kNone, kZScore };

struct WindowConfig {
  std::int64_t window_length_us = 60'000'000;
  int history_T = 3;
  Standardization standardization = Standardization::kZScore;

  void validate() const;
};

/// Half-open time interval [start_us, end_us) with its index.
struct Window {
  std::int64_t index = 0;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
};

Window window_bounds(std::int64_t index, std::int64_t window_length_us);
std::int64_t window_of(std::int64_t ts_us, std::int64_t window_length_us);

/// Per-edge sequence of feature vectors, oldest first.
struct EdgeSeries {
  std::size_t i = 0;
  std::size_t j = 0;
  std::vector<std::vector<double>> vectors;

  bool operator==(const EdgeSeries&) const = default;
};

/// Directed service graph of one window. Nodes are services in
/// lexicographic order; A(i, j) counts parent->child calls from service i to
/// service j. Fresh from aggregation, each edge_series entry holds a single
/// vector (the current window); build_edge_history extends it to T.
struct ServiceGraph {
  std::int64_t window_index = 0;
  std::vector<std::string> services;
  Tensor2 X{0, kNodeFeatureDim};
  Tensor2 A{0, 0};
  std::vector<EdgeSeries> edge_series;  // sorted by (i, j)

  std::size_t node_count() const noexcept { return services.size(); }
  std::optional<std::size_t> index_of(const std::string& service) const;
  /// Checks the structural invariants; throws kDimension/kInput.
  void validate() const;

  bool operator==(const ServiceGraph&) const = default;
};

/// Builds the graph of one window. Every tree's root must start inside the
/// window; a window without trees yields an empty (|V| = 0) graph.
ServiceGraph aggregate_window(const std::vector<TraceTree>& trees,
                              const Window& window, const WindowConfig& cfg);

/// Assigns each tree to the window containing its root's start_ts.
std::map<std::int64_t, std::vector<TraceTree>> assign_windows(
    std::vector<TraceTree> trees, std::int64_t window_length_us);

/// Aggregates every window in [first, last] (contiguous, empty windows
/// included). Windows are independent and run in parallel.
std::vector<ServiceGraph> aggregate_windows(
    const std::map<std::int64_t, std::vector<TraceTree>>& by_window,
    std::int64_t first, std::int64_t last, const WindowConfig& cfg);

/// Symmetric normalized propagation operator D^-1/2 (B + I) D^-1/2, where B
/// is the binarized adjacency symmetrized as max(B, B^T).
Tensor2 normalize_adjacency(const Tensor2& A);

struct FeatureStats {
  std::array<double, kNodeFeatureDim> node_mean{};
  std::array<double, kNodeFeatureDim> node_std{};
  std::array<double, kEdgeFeatureDim> edge_mean{};
  std::array<double, kEdgeFeatureDim> edge_std{};

  bool operator==(const FeatureStats&) const = default;
};

inline constexpr double kStdFloor = 1e-8;

/// Population mean/std of every node row and every edge vector of `graphs`,
/// std floored at kStdFloor.
FeatureStats compute_feature_stats(const std::vector<ServiceGraph>& graphs);

/// Z-scores X and the edge vectors of single-window (pre-history) graphs.
/// When `stats` is absent they are computed from `graphs` and returned.
struct StandardizeResult {
  std::vector<ServiceGraph> graphs;
  FeatureStats stats;
};
StandardizeResult standardize_features(std::vector<ServiceGraph> graphs,
                                       const std::optional<FeatureStats>& stats);

/// Builds the length-T edge history for the last graph of `window_graphs`
/// (T consecutive windows, oldest first). Edges absent from a window
/// contribute zero vectors. Edges touching a service that is not a node of the
/// latest window cannot be indexed and are omitted.
std::vector<EdgeSeries> build_edge_history(
    std::span<const ServiceGraph> window_graphs);

/// Returns a copy of graphs[k] with its T-window history, for every k. Windows
/// before the first graph count as empty.
std::vector<ServiceGraph> with_edge_history(const std::vector<ServiceGraph>& graphs,
                                            int history_T);

std::string graph_to_json(const ServiceGraph& g);
std::string graphs_to_json(const std::vector<ServiceGraph>& graphs);
ServiceGraph graph_from_json(const std::string& text);
std::vector<ServiceGraph> graphs_from_json(const std::string& text);

}  // namespace tracegraph
