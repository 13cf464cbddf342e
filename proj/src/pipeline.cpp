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

#include "tracegraph/pipeline.hpp"

#include <algorithm>

namespace tracegraph {

GraphBuild build_graphs(std::vector<SpanRecord> spans, const WindowConfig& cfg,
                        std::optional<WindowRange> range) {
  cfg.validate();
  GraphBuild out;
  auto built = build_trace_trees(std::move(spans));
  out.errors = std::move(built.errors);
  out.trees = assign_windows(std::move(built.trees), cfg.window_length_us);
  if (!range) {
    if (out.trees.empty()) return out;
    range = WindowRange{out.trees.begin()->first, out.trees.rbegin()->first};
  }
  if (range->last < range->first) return out;
  out.graphs = aggregate_windows(out.trees, range->first, range->last, cfg);
  return out;
}

std::vector<PreparedGraph> prepare_windows(const std::vector<ServiceGraph>& raw,
                                           const WindowConfig& cfg,
                                           const std::optional<FeatureStats>& stats) {
  cfg.validate();
  std::vector<ServiceGraph> graphs = raw;
  if (cfg.standardization == Standardization::kZScore) {
    graphs = standardize_features(std::move(graphs), stats).graphs;
  }
  const auto with_history = with_edge_history(graphs, cfg.history_T);
  std::vector<PreparedGraph> out;
  out.reserve(with_history.size());
  for (const auto& g : with_history) out.push_back(prepare_graph(g, cfg.history_T));
  return out;
}

}  // namespace tracegraph
