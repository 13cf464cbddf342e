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

#include "tracegraph/trace_tree.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

namespace tracegraph {

namespace {

std::string join(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ",";
    out += id;
  }
  return out;
}

[[noreturn]] void fail(TraceError::Kind kind, const std::string& trace_id,
                       std::vector<std::string> ids, const std::string& what) {
  std::sort(ids.begin(), ids.end());
  const std::string msg =
      "trace " + trace_id + ": " + what + " [" + join(ids) + "]";
  throw TraceError(kind, trace_id, std::move(ids), msg);
}

}  // namespace

std::size_t TraceTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(children.begin(), children.end(),
                    [](const auto& c) { return c.empty(); }));
}

TraceTree build_trace_tree(std::vector<SpanRecord> spans) {
  if (spans.empty()) {
    throw TraceError(TraceError::Kind::kEmpty, "", {}, "empty trace");
  }
  const std::string trace_id = spans.front().trace_id;

  std::unordered_map<std::string, std::size_t> index;
  index.reserve(spans.size());
  std::vector<std::string> duplicates;
  std::vector<std::string> mixed;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].trace_id != trace_id) mixed.push_back(spans[i].span_id);
    if (!index.emplace(spans[i].span_id, i).second) {
      duplicates.push_back(spans[i].span_id);
    }
  }
  if (!mixed.empty()) {
    fail(TraceError::Kind::kMixedTraceIds, trace_id, mixed,
         "spans from other traces");
  }
  if (!duplicates.empty()) {
    fail(TraceError::Kind::kDuplicateSpanId, trace_id, duplicates,
         "duplicate span ids");
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(spans.size(), kNone);
  std::vector<std::string> dangling;
  std::vector<std::string> roots;
  std::size_t root = kNone;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].is_root()) {
      roots.push_back(spans[i].span_id);
      root = i;
      continue;
    }
    auto it = index.find(*spans[i].parent_span_id);
    if (it == index.end()) {
      dangling.push_back(spans[i].span_id);
    } else {
      parent[i] = it->second;
    }
  }
  if (!dangling.empty()) {
    fail(TraceError::Kind::kDanglingParent, trace_id, dangling,
         "parent_span_id does not resolve");
  }
  if (roots.size() > 1) {
    fail(TraceError::Kind::kMultipleRoots, trace_id, roots, "multiple roots");
  }

  TraceTree tree;
  tree.trace_id = trace_id;
  tree.children.resize(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (parent[i] != kNone) tree.children[parent[i]].push_back(i);
  }

  // Reachability from the root; anything left over hangs off a cycle.
  std::vector<char> reached(spans.size(), 0);
  if (root != kNone) {
    std::vector<std::size_t> stack{root};
    reached[root] = 1;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      for (std::size_t c : tree.children[k]) {
        if (!reached[c]) {
          reached[c] = 1;
          stack.push_back(c);
        }
      }
    }
  }
  if (std::find(reached.begin(), reached.end(), 0) != reached.end()) {
    // Report the spans that sit on a cycle of the parent relation.
    // state: 0 unvisited, 1 on current walk, 2 finished
    std::vector<char> state(spans.size(), 0);
    std::vector<char> on_cycle(spans.size(), 0);
    for (std::size_t s = 0; s < spans.size(); ++s) {
      if (reached[s] || state[s]) continue;
      std::vector<std::size_t> walk;
      std::size_t k = s;
      while (k != kNone && !reached[k] && state[k] == 0) {
        state[k] = 1;
        walk.push_back(k);
        k = parent[k];
      }
      if (k != kNone && state[k] == 1) {
        for (auto it = walk.rbegin(); it != walk.rend(); ++it) {
          on_cycle[*it] = 1;
          if (*it == k) break;
        }
      }
      for (std::size_t w : walk) state[w] = 2;
    }
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (on_cycle[i]) ids.push_back(spans[i].span_id);
    }
    fail(TraceError::Kind::kCycle, trace_id, ids, "cycle in parent links");
  }

  for (auto& kids : tree.children) {
    std::sort(kids.begin(), kids.end(), [&](std::size_t x, std::size_t y) {
      if (spans[x].start_ts != spans[y].start_ts) {
        return spans[x].start_ts < spans[y].start_ts;
      }
      return spans[x].span_id < spans[y].span_id;
    });
  }
  tree.root = root;
  tree.spans = std::move(spans);
  return tree;
}

std::vector<CallPath> extract_call_paths(const TraceTree& tree,
                                         std::int64_t window_index) {
  std::vector<CallPath> paths;
  if (tree.spans.empty()) return paths;

  // Iterative pre-order walk; `path` holds the current root-to-node chain.
  struct Frame {
    std::size_t node;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{tree.root, 0}};
  std::vector<std::size_t> path{tree.root};
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& kids = tree.children[top.node];
    if (kids.empty()) {
      CallPath p;
      p.window_index = window_index;
      for (std::size_t k : path) {
        p.services.push_back(tree.spans[k].service_name);
        p.span_ids.push_back(tree.spans[k].span_id);
      }
      paths.push_back(std::move(p));
    }
    if (top.next_child < kids.size()) {
      const std::size_t child = kids[top.next_child++];
      stack.push_back({child, 0});
      path.push_back(child);
    } else {
      stack.pop_back();
      path.pop_back();
    }
  }
  return paths;
}

std::vector<std::vector<SpanRecord>> group_by_trace(std::vector<SpanRecord> spans) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<SpanRecord>> groups;
  for (auto& s : spans) {
    auto [it, inserted] = slot.emplace(s.trace_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(std::move(s));
  }
  return groups;
}

TreeBuildResult build_trace_trees(std::vector<SpanRecord> spans) {
  auto groups = group_by_trace(std::move(spans));
  std::vector<std::optional<TraceTree>> built(groups.size());
  std::vector<std::string> errors(groups.size());
  const auto n = static_cast<std::int64_t>(groups.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      built[i] = build_trace_tree(std::move(groups[i]));
    } catch (const TraceError& e) {
      errors[i] = e.what();
    }
  }
  TreeBuildResult result;
  for (std::size_t i = 0; i < built.size(); ++i) {
    if (built[i]) {
      result.trees.push_back(std::move(*built[i]));
    } else {
      result.errors.push_back(std::move(errors[i]));
    }
  }
  return result;
}

}  // namespace tracegraph
