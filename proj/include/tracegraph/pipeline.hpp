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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tracegraph/model.hpp"
#include "tracegraph/service_graph.hpp"
#include "tracegraph/spans.hpp"
#include "tracegraph/trace_tree.hpp"

namespace tracegraph {

struct WindowRange {
  std::int64_t first = 0;
  std::int64_t last = -1;  // inclusive; last < first means empty
};

struct GraphBuild {
  std::vector<ServiceGraph> graphs;  // one per window of the range, in order
  std::map<std::int64_t, std::vector<TraceTree>> trees;
  std::vector<std::string> errors;   // invalid traces, skipped
};

/// Spans to raw per-window graphs. Without `range`, covers the windows from
/// the earliest to the latest root span.
GraphBuild build_graphs(std::vector<SpanRecord> spans, const WindowConfig& cfg,
                        std::optional<WindowRange> range = std::nullopt);

/// Standardizes raw graphs (when cfg asks for it, using `stats`), attaches the
/// T-window edge history and precomputes the model inputs.
std::vector<PreparedGraph> prepare_windows(const std::vector<ServiceGraph>& raw,
                                           const WindowConfig& cfg,
                                           const std::optional<FeatureStats>& stats);

}  // namespace tracegraph
