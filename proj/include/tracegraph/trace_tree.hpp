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
#include <string>
#include <vector>

#include "tracegraph/error.hpp"
#include "tracegraph/spans.hpp"

namespace tracegraph {

/// Call tree of one trace. Nodes are stored in `spans`; `children[k]` lists
/// the indices of node k's children ordered by (start_ts, span_id).
struct TraceTree {
  std::string trace_id;
  std::vector<SpanRecord> spans;
  std::vector<std::vector<std::size_t>> children;
  std::size_t root = 0;

  std::size_t span_count() const noexcept { return spans.size(); }
  const SpanRecord& root_span() const { return spans[root]; }
  std::size_t leaf_count() const;
};

/// Raised for structurally invalid traces; `span_ids` names the offenders.
class TraceError : public Error {
 public:
  enum class Kind { kEmpty, kMixedTraceIds, kDuplicateSpanId, kMultipleRoots,
                    kDanglingParent, kCycle };

  TraceError(Kind kind, std::string trace_id, std::vector<std::string> span_ids,
             const std::string& message)
      : Error(ErrorCode::kTrace, message),
        kind_(kind),
        trace_id_(std::move(trace_id)),
        span_ids_(std::move(span_ids)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& trace_id() const noexcept { return trace_id_; }
  const std::vector<std::string>& span_ids() const noexcept { return span_ids_; }

 private:
  Kind kind_;
  std::string trace_id_;
  std::vector<std::string> span_ids_;
};

/// Root-to-leaf sequence of services along one call path.
struct CallPath {
  std::vector<std::string> services;
  std::vector<std::string> span_ids;
  std::int64_t window_index = 0;

  bool operator==(const CallPath&) const = default;
};

/// Reconstructs the call tree of spans that share one trace_id.
/// Dangling parents are reported first, then multiple roots, then cycles
/// (spans unreachable from the root, or every span when there is no root).
TraceTree build_trace_tree(std::vector<SpanRecord> spans);

/// One path per leaf, in depth-first (pre-order) leaf order.
std::vector<CallPath> extract_call_paths(const TraceTree& tree,
                                         std::int64_t window_index = 0);

/// Groups spans by trace_id, preserving first-appearance order of traces and
/// input order within each trace.
std::vector<std::vector<SpanRecord>> group_by_trace(std::vector<SpanRecord> spans);

struct TreeBuildResult {
  std::vector<TraceTree> trees;
  std::vector<std::string> errors;  // one message per rejected trace
};

/// Groups and builds every trace independently (in parallel); invalid traces
/// are reported in `errors` and skipped.
TreeBuildResult build_trace_trees(std::vector<SpanRecord> spans);

}  // namespace tracegraph
