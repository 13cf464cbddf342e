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

#include "tracegraph/service_graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <json.hpp>

#include "tracegraph/error.hpp"
#include "tracegraph/json_writer.hpp"

namespace tracegraph {

using nlohmann::json;

void WindowConfig::validate() const {
  if (window_length_us <= 0) {
    throw Error(ErrorCode::kConfig, "window.length_us must be > 0");
  }
  if (history_T < 1) {
    throw Error(ErrorCode::kConfig, "window.history_T must be >= 1");
  }
}

std::int64_t window_of(std::int64_t ts_us, std::int64_t window_length_us) {
  // floor division so negative timestamps land in negative windows
  std::int64_t q = ts_us / window_length_us;
  if (ts_us % window_length_us != 0 && ts_us < 0) --q;
  return q;
}

Window window_bounds(std::int64_t index, std::int64_t window_length_us) {
  return Window{index, index * window_length_us, (index + 1) * window_length_us};
}

std::optional<std::size_t> ServiceGraph::index_of(const std::string& service) const {
  auto it = std::lower_bound(services.begin(), services.end(), service);
  if (it == services.end() || *it != service) return std::nullopt;
  return static_cast<std::size_t>(it - services.begin());
}

void ServiceGraph::validate() const {
  const std::size_t n = services.size();
  if (!std::is_sorted(services.begin(), services.end()) ||
      std::adjacent_find(services.begin(), services.end()) != services.end()) {
    throw Error(ErrorCode::kInput, "graph services must be sorted and unique");
  }
  if (X.rows() != n) {
    throw Error(ErrorCode::kDimension, "graph X has " + std::to_string(X.rows()) +
                                           " rows for " + std::to_string(n) +
                                           " services");
  }
  if (n > 0 && X.cols() != kNodeFeatureDim) {
    throw Error(ErrorCode::kDimension, "graph X has " + std::to_string(X.cols()) +
                                           " columns, expected " +
                                           std::to_string(kNodeFeatureDim));
  }
  if (A.rows() != n || A.cols() != n) {
    throw Error(ErrorCode::kDimension,
                "graph A is " + A.shape_string() + " for " + std::to_string(n) +
                    " services");
  }
  for (double v : A.data()) {
    if (v < 0.0) throw Error(ErrorCode::kInput, "graph A has negative entries");
  }
  std::size_t len = 0;
  for (const auto& e : edge_series) {
    if (e.i >= n || e.j >= n) {
      throw Error(ErrorCode::kInput, "edge_series index out of range");
    }
    if (e.vectors.empty()) {
      throw Error(ErrorCode::kInput, "edge_series entry with no vectors");
    }
    if (len == 0) len = e.vectors.size();
    if (e.vectors.size() != len) {
      throw Error(ErrorCode::kDimension, "ragged edge_series lengths");
    }
    for (const auto& v : e.vectors) {
      if (v.size() != kEdgeFeatureDim) {
        throw Error(ErrorCode::kDimension,
                    "edge vector has " + std::to_string(v.size()) +
                        " components, expected " + std::to_string(kEdgeFeatureDim));
      }
    }
  }
}

namespace {

struct EdgeAccum {
  double calls = 0.0;
  double latency_sum = 0.0;
  double retries = 0.0;
  double timeouts = 0.0;
};

struct NodeAccum {
  std::vector<std::int64_t> durations;
  double errors = 0.0;
};

double p95_nearest_rank(std::vector<std::int64_t>& durations) {
  std::sort(durations.begin(), durations.end());
  const std::size_t n = durations.size();
  const std::size_t rank = (95 * n + 99) / 100;  // ceil(0.95 n), 1-based
  return static_cast<double>(durations[std::max<std::size_t>(rank, 1) - 1]);
}

}  // namespace

ServiceGraph aggregate_window(const std::vector<TraceTree>& trees,
                              const Window& window, const WindowConfig& cfg) {
  cfg.validate();
  std::map<std::string, NodeAccum> nodes;
  std::map<std::pair<std::string, std::string>, EdgeAccum> edges;

  for (const auto& tree : trees) {
    const auto root_ts = tree.root_span().start_ts;
    if (root_ts < window.start_us || root_ts >= window.end_us) {
      throw Error(ErrorCode::kInput,
                  "trace " + tree.trace_id + " starts at " + std::to_string(root_ts) +
                      ", outside window " + std::to_string(window.index));
    }
    for (std::size_t k = 0; k < tree.spans.size(); ++k) {
      const SpanRecord& s = tree.spans[k];
      auto& acc = nodes[s.service_name];
      acc.durations.push_back(s.duration);
      if (s.has_error()) acc.errors += 1.0;
      for (std::size_t c : tree.children[k]) {
        const SpanRecord& child = tree.spans[c];
        auto& e = edges[{s.service_name, child.service_name}];
        e.calls += 1.0;
        e.latency_sum += static_cast<double>(child.duration);
        e.retries += static_cast<double>(child.retry_count());
        if (child.has_timeout()) e.timeouts += 1.0;
      }
    }
  }

  ServiceGraph g;
  g.window_index = window.index;
  for (const auto& [name, _] : nodes) g.services.push_back(name);
  const std::size_t n = g.services.size();
  g.A = Tensor2(n, n);
  g.X = Tensor2(n, kNodeFeatureDim);

  for (const auto& [key, e] : edges) {
    const std::size_t i = *g.index_of(key.first);
    const std::size_t j = *g.index_of(key.second);
    g.A(i, j) = e.calls;
    g.edge_series.push_back(EdgeSeries{
        i, j, {{e.calls, e.latency_sum / e.calls, e.retries, e.timeouts}}});
  }
  std::sort(g.edge_series.begin(), g.edge_series.end(),
            [](const EdgeSeries& a, const EdgeSeries& b) {
              return std::pair(a.i, a.j) < std::pair(b.i, b.j);
            });

  const double seconds = static_cast<double>(cfg.window_length_us) / 1e6;
  std::size_t i = 0;
  for (auto& [name, acc] : nodes) {
    const double count = static_cast<double>(acc.durations.size());
    double sum = 0.0;
    for (auto d : acc.durations) sum += static_cast<double>(d);
    g.X(i, kMeanLatencyUs) = sum / count;
    g.X(i, kP95LatencyUs) = p95_nearest_rank(acc.durations);
    g.X(i, kErrorRate) = acc.errors / count;
    g.X(i, kThroughputRps) = count / seconds;
    double fan_in = 0.0;
    double fan_out = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (g.A(j, i) > 0.0) fan_in += 1.0;
      if (g.A(i, j) > 0.0) fan_out += 1.0;
    }
    g.X(i, kFanInDegree) = fan_in;
    g.X(i, kFanOutDegree) = fan_out;
    ++i;
  }
  return g;
}

std::map<std::int64_t, std::vector<TraceTree>> assign_windows(
    std::vector<TraceTree> trees, std::int64_t window_length_us) {
  if (window_length_us <= 0) {
    throw Error(ErrorCode::kConfig, "window length must be > 0");
  }
  std::map<std::int64_t, std::vector<TraceTree>> out;
  for (auto& t : trees) {
    const auto w = window_of(t.root_span().start_ts, window_length_us);
    out[w].push_back(std::move(t));
  }
  return out;
}

std::vector<ServiceGraph> aggregate_windows(
    const std::map<std::int64_t, std::vector<TraceTree>>& by_window,
    std::int64_t first, std::int64_t last, const WindowConfig& cfg) {
  if (last < first) return {};
  const std::vector<TraceTree> none;
  const auto count = static_cast<std::int64_t>(last - first + 1);
  std::vector<ServiceGraph> graphs(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < count; ++k) {
    const std::int64_t w = first + k;
    auto it = by_window.find(w);
    graphs[static_cast<std::size_t>(k)] =
        aggregate_window(it == by_window.end() ? none : it->second,
                         window_bounds(w, cfg.window_length_us), cfg);
  }
  return graphs;
}

Tensor2 normalize_adjacency(const Tensor2& A) {
  if (A.rows() != A.cols()) {
    throw Error(ErrorCode::kDimension,
                "normalize_adjacency: adjacency must be square, got " +
                    A.shape_string());
  }
  const std::size_t n = A.rows();
  Tensor2 tilde(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (A(i, j) < 0.0) {
        throw Error(ErrorCode::kInput, "normalize_adjacency: negative entry");
      }
      if (A(i, j) > 0.0 || A(j, i) > 0.0) tilde(i, j) = 1.0;
    }
    tilde(i, i) = 1.0;
  }
  // Degrees are small integers, so d_i * d_j is exact and a single rounding
  // in sqrt keeps the entries symmetric and the fixtures exact.
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) deg[i] += tilde(i, j);
  }
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (tilde(i, j) != 0.0) out(i, j) = 1.0 / std::sqrt(deg[i] * deg[j]);
    }
  }
  return out;
}

FeatureStats compute_feature_stats(const std::vector<ServiceGraph>& graphs) {
  FeatureStats st;
  double node_rows = 0.0;
  double edge_rows = 0.0;
  for (const auto& g : graphs) {
    if (g.X.cols() != kNodeFeatureDim) {
      throw Error(ErrorCode::kDimension,
                  "feature stats: graph has " + std::to_string(g.X.cols()) +
                      " node features, expected " + std::to_string(kNodeFeatureDim));
    }
    for (std::size_t r = 0; r < g.X.rows(); ++r) {
      for (std::size_t c = 0; c < kNodeFeatureDim; ++c) st.node_mean[c] += g.X(r, c);
      node_rows += 1.0;
    }
    for (const auto& e : g.edge_series) {
      for (const auto& v : e.vectors) {
        for (std::size_t c = 0; c < kEdgeFeatureDim; ++c) st.edge_mean[c] += v[c];
        edge_rows += 1.0;
      }
    }
  }
  for (auto& m : st.node_mean) m = node_rows > 0 ? m / node_rows : 0.0;
  for (auto& m : st.edge_mean) m = edge_rows > 0 ? m / edge_rows : 0.0;
  for (const auto& g : graphs) {
    for (std::size_t r = 0; r < g.X.rows(); ++r) {
      for (std::size_t c = 0; c < kNodeFeatureDim; ++c) {
        const double d = g.X(r, c) - st.node_mean[c];
        st.node_std[c] += d * d;
      }
    }
    for (const auto& e : g.edge_series) {
      for (const auto& v : e.vectors) {
        for (std::size_t c = 0; c < kEdgeFeatureDim; ++c) {
          const double d = v[c] - st.edge_mean[c];
          st.edge_std[c] += d * d;
        }
      }
    }
  }
  for (auto& s : st.node_std) {
    s = node_rows > 0 ? std::sqrt(s / node_rows) : 0.0;
    s = std::max(s, kStdFloor);
  }
  for (auto& s : st.edge_std) {
    s = edge_rows > 0 ? std::sqrt(s / edge_rows) : 0.0;
    s = std::max(s, kStdFloor);
  }
  return st;
}

StandardizeResult standardize_features(std::vector<ServiceGraph> graphs,
                                       const std::optional<FeatureStats>& stats) {
  for (const auto& g : graphs) {
    if (g.X.cols() != kNodeFeatureDim) {
      throw Error(ErrorCode::kDimension,
                  "standardize: graph has " + std::to_string(g.X.cols()) +
                      " node features, stats cover " + std::to_string(kNodeFeatureDim));
    }
    for (const auto& e : g.edge_series) {
      if (e.vectors.size() != 1) {
        throw Error(ErrorCode::kInput,
                    "standardize: expects single-window graphs (before history)");
      }
      if (e.vectors[0].size() != kEdgeFeatureDim) {
        throw Error(ErrorCode::kDimension,
                    "standardize: edge vector has " +
                        std::to_string(e.vectors[0].size()) +
                        " components, stats cover " + std::to_string(kEdgeFeatureDim));
      }
    }
  }
  StandardizeResult out;
  out.stats = stats ? *stats : compute_feature_stats(graphs);
  for (auto& g : graphs) {
    for (std::size_t r = 0; r < g.X.rows(); ++r) {
      for (std::size_t c = 0; c < kNodeFeatureDim; ++c) {
        g.X(r, c) = (g.X(r, c) - out.stats.node_mean[c]) / out.stats.node_std[c];
      }
    }
    for (auto& e : g.edge_series) {
      auto& v = e.vectors[0];
      for (std::size_t c = 0; c < kEdgeFeatureDim; ++c) {
        v[c] = (v[c] - out.stats.edge_mean[c]) / out.stats.edge_std[c];
      }
    }
  }
  out.graphs = std::move(graphs);
  return out;
}

std::vector<EdgeSeries> build_edge_history(
    std::span<const ServiceGraph> window_graphs) {
  if (window_graphs.empty()) {
    throw Error(ErrorCode::kInput, "build_edge_history: no graphs");
  }
  for (std::size_t t = 1; t < window_graphs.size(); ++t) {
    if (window_graphs[t].window_index != window_graphs[t - 1].window_index + 1) {
      throw Error(ErrorCode::kInput,
                  "build_edge_history: windows " +
                      std::to_string(window_graphs[t - 1].window_index) + " and " +
                      std::to_string(window_graphs[t].window_index) +
                      " are not contiguous");
    }
  }
  const std::size_t T = window_graphs.size();
  const ServiceGraph& latest = window_graphs.back();
  std::map<std::pair<std::size_t, std::size_t>, EdgeSeries> merged;
  for (std::size_t t = 0; t < T; ++t) {
    const ServiceGraph& g = window_graphs[t];
    for (const auto& e : g.edge_series) {
      if (g.A(e.i, e.j) <= 0.0) continue;  // padding carried from older history
      auto li = latest.index_of(g.services[e.i]);
      auto lj = latest.index_of(g.services[e.j]);
      if (!li || !lj) continue;
      auto [it, inserted] = merged.try_emplace({*li, *lj});
      if (inserted) {
        it->second.i = *li;
        it->second.j = *lj;
        it->second.vectors.assign(T, std::vector<double>(kEdgeFeatureDim, 0.0));
      }
      it->second.vectors[t] = e.vectors.back();
    }
  }
  std::vector<EdgeSeries> out;
  out.reserve(merged.size());
  for (auto& [_, s] : merged) out.push_back(std::move(s));
  return out;
}

std::vector<ServiceGraph> with_edge_history(const std::vector<ServiceGraph>& graphs,
                                            int history_T) {
  if (history_T < 1) {
    throw Error(ErrorCode::kConfig, "history_T must be >= 1");
  }
  const auto T = static_cast<std::size_t>(history_T);
  std::vector<ServiceGraph> out(graphs.size());
  const auto n = static_cast<std::int64_t>(graphs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < n; ++k) {
    std::vector<ServiceGraph> window;
    window.reserve(T);
    const std::int64_t latest = graphs[static_cast<std::size_t>(k)].window_index;
    for (std::size_t t = 0; t < T; ++t) {
      const std::int64_t pos = k - static_cast<std::int64_t>(T - 1 - t);
      if (pos >= 0) {
        window.push_back(graphs[static_cast<std::size_t>(pos)]);
      } else {
        ServiceGraph empty;
        empty.window_index = latest - static_cast<std::int64_t>(T - 1 - t);
        window.push_back(std::move(empty));
      }
    }
    ServiceGraph g = graphs[static_cast<std::size_t>(k)];
    g.edge_series = build_edge_history(window);
    out[static_cast<std::size_t>(k)] = std::move(g);
  }
  return out;
}

namespace {

void write_matrix(JsonWriter& w, const Tensor2& m) {
  w.begin_array();
  for (std::size_t r = 0; r < m.rows(); ++r) w.array(m.row(r));
  w.end_array();
}

void write_graph(JsonWriter& w, const ServiceGraph& g) {
  w.begin_object();
  w.key("window_index").value(g.window_index);
  w.key("services").array(std::span<const std::string>(g.services));
  w.key("X");
  write_matrix(w, g.X);
  w.key("A");
  write_matrix(w, g.A);
  w.key("edge_series").begin_array();
  for (const auto& e : g.edge_series) {
    w.begin_object();
    w.key("i").value(static_cast<std::uint64_t>(e.i));
    w.key("j").value(static_cast<std::uint64_t>(e.j));
    w.key("vectors").begin_array();
    for (const auto& v : e.vectors) w.array(std::span<const double>(v));
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.end_object();
}

Tensor2 read_matrix(const json& j, std::size_t default_cols, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::kInput, std::string(what) + " is not an array");
  std::vector<std::vector<double>> rows;
  std::size_t cols = default_cols;
  for (const auto& row : j) {
    if (!row.is_array()) {
      throw Error(ErrorCode::kInput, std::string(what) + " row is not an array");
    }
    rows.push_back(row.get<std::vector<double>>());
  }
  if (!rows.empty()) cols = rows.front().size();
  return Tensor2::from_rows(rows, cols);
}

ServiceGraph read_graph(const json& j) {
  try {
    ServiceGraph g;
    g.window_index = j.at("window_index").get<std::int64_t>();
    g.services = j.at("services").get<std::vector<std::string>>();
    g.X = read_matrix(j.at("X"), kNodeFeatureDim, "X");
    g.A = read_matrix(j.at("A"), g.services.size(), "A");
    for (const auto& e : j.at("edge_series")) {
      EdgeSeries s;
      s.i = e.at("i").get<std::size_t>();
      s.j = e.at("j").get<std::size_t>();
      s.vectors = e.at("vectors").get<std::vector<std::vector<double>>>();
      g.edge_series.push_back(std::move(s));
    }
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInput, std::string("malformed graph JSON: ") + e.what());
  }
}

json parse_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kInput, "graph document is not valid JSON");
  return j;
}

}  // namespace

std::string graph_to_json(const ServiceGraph& g) {
  JsonWriter w;
  write_graph(w, g);
  return w.str();
}

std::string graphs_to_json(const std::vector<ServiceGraph>& graphs) {
  std::string out = "{\"graphs\":[\n";
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    out += graph_to_json(graphs[k]);
    out += k + 1 < graphs.size() ? ",\n" : "\n";
  }
  out += "]}\n";
  return out;
}

ServiceGraph graph_from_json(const std::string& text) {
  return read_graph(parse_json(text));
}

std::vector<ServiceGraph> graphs_from_json(const std::string& text) {
  const json j = parse_json(text);
  if (!j.is_object() || !j.contains("graphs") || !j["graphs"].is_array()) {
    throw Error(ErrorCode::kInput, "graphs document must be {\"graphs\": [...]}");
  }
  std::vector<ServiceGraph> out;
  for (const auto& g : j["graphs"]) out.push_back(read_graph(g));
  return out;
}

}  // namespace tracegraph
