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

#include "tracegraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "tracegraph/error.hpp"
#include "tracegraph/json_writer.hpp"
#include "tracegraph/service_graph.hpp"
#include "tracegraph/trace_tree.hpp"

namespace tracegraph {
namespace {

// Social-network style service names; the first is the entry point.
constexpr const char* kServiceNames[] = {
    "nginx-web-server",          "compose-post-service",
    "home-timeline-service",     "user-timeline-service",
    "social-graph-service",      "user-service",
    "text-service",              "media-service",
    "unique-id-service",         "url-shorten-service",
    "user-mention-service",      "post-storage-service",
    "write-home-timeline-service", "media-frontend",
    "compose-post-redis",        "home-timeline-redis",
    "user-timeline-redis",       "social-graph-redis",
    "post-storage-memcached",    "user-memcached",
    "url-shorten-memcached",     "media-memcached",
    "post-storage-mongodb",      "user-timeline-mongodb",
    "social-graph-mongodb",      "user-mongodb",
    "url-shorten-mongodb",       "media-mongodb",
    "write-home-timeline-rabbitmq", "jaeger-agent",
};
constexpr std::size_t kNamedServices = std::size(kServiceNames);

std::string service_name(std::size_t k) {
  if (k < kNamedServices) return kServiceNames[k];
  return "service-" + std::to_string(k);
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double standard_normal(std::mt19937_64& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
}

std::int64_t scaled_duration(std::int64_t duration, double factor) {
  return std::max<std::int64_t>(1, std::llround(static_cast<double>(duration) * factor));
}

class TraceEmitter {
 public:
  TraceEmitter(const Topology& topo, std::mt19937_64& rng, std::vector<SpanRecord>& out)
      : topo_(topo), rng_(rng), out_(out) {}

  void emit_trace(std::int64_t start_ts) {
    const std::string trace_id = hex16(rng_());
    emit(trace_id, topo_.entry, std::nullopt, start_ts, topo_.entry_latency_us,
         0.005, 0.0);
  }

 private:
  std::int64_t emit(const std::string& trace_id, std::size_t service,
                    const std::optional<std::string>& parent, std::int64_t start,
                    double base_latency, double error_prob, double timeout_prob) {
    SpanRecord s;
    s.trace_id = trace_id;
    s.span_id = hex16(rng_());
    s.parent_span_id = parent;
    s.service_name = topo_.services[service];
    s.operation_name = s.service_name + "/handle";
    s.start_ts = start;
    const double z = standard_normal(rng_);
    s.duration = std::max<std::int64_t>(
        1, std::llround(base_latency * std::exp(kLatencyLogSigma * z)));
    const bool error = uniform01(rng_) < error_prob;
    const bool timeout = uniform01(rng_) < timeout_prob;
    const bool retry = uniform01(rng_) < 0.5;
    s.tags["error"] = error ? "true" : "false";
    if (timeout) s.tags["timeout"] = "true";
    if (error && retry) s.tags["retry_count"] = "1";
    const std::string span_id = s.span_id;
    const std::int64_t duration = s.duration;
    out_.push_back(std::move(s));

    std::int64_t cursor = start + 1;
    for (std::size_t e : topo_.outgoing[service]) {
      const TopologyEdge& edge = topo_.edges[e];
      if (uniform01(rng_) >= edge.routing_prob) continue;
      cursor += emit(trace_id, edge.to, span_id, cursor, edge.base_latency_us,
                     edge.error_prob, edge.timeout_prob);
    }
    return duration;
  }

  const Topology& topo_;
  std::mt19937_64& rng_;
  std::vector<SpanRecord>& out_;
};

// Window of each trace, taken from its root span. Traces without a root are
// left out.
std::unordered_map<std::string, std::int64_t> trace_windows(
    const std::vector<SpanRecord>& spans, std::int64_t window_length_us) {
  std::unordered_map<std::string, std::int64_t> out;
  for (const auto& s : spans) {
    if (s.is_root()) out.emplace(s.trace_id, window_of(s.start_ts, window_length_us));
  }
  return out;
}

// Indices of `root` and all its descendants within one trace.
std::vector<std::size_t> subtree(const std::vector<SpanRecord>& trace, std::size_t root) {
  std::unordered_multimap<std::string, std::size_t> children;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (trace[k].parent_span_id) children.emplace(*trace[k].parent_span_id, k);
  }
  std::vector<std::size_t> out{root};
  for (std::size_t head = 0; head < out.size(); ++head) {
    auto [lo, hi] = children.equal_range(trace[out[head]].span_id);
    for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  }
  std::sort(out.begin() + 1, out.end());
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void TopologySpec::validate() const {
  if (n_services < 1) throw Error(ErrorCode::kConfig, "topology.n_services must be >= 1");
  if (!(edge_density > 0.0 && edge_density <= 1.0)) {
    throw Error(ErrorCode::kConfig, "topology.edge_density must be in (0, 1]");
  }
  if (max_depth < 1) throw Error(ErrorCode::kConfig, "topology.max_depth must be >= 1");
}

std::optional<std::size_t> Topology::index_of(std::string_view service) const {
  for (std::size_t k = 0; k < services.size(); ++k) {
    if (services[k] == service) return k;
  }
  return std::nullopt;
}

std::vector<std::pair<std::size_t, int>> Topology::downstream(std::size_t service,
                                                              int max_hops) const {
  std::vector<int> hops(services.size(), -1);
  std::deque<std::size_t> queue{service};
  hops[service] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    if (hops[v] == max_hops) continue;
    for (std::size_t e : outgoing[v]) {
      const std::size_t w = edges[e].to;
      if (hops[w] >= 0) continue;
      hops[w] = hops[v] + 1;
      queue.push_back(w);
    }
  }
  std::vector<std::pair<std::size_t, int>> out;
  for (std::size_t k = 0; k < hops.size(); ++k) {
    if (hops[k] >= 0) out.emplace_back(k, hops[k]);
  }
  return out;
}

Topology generate_topology(const TopologySpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto n = static_cast<std::size_t>(spec.n_services);
  Topology t;
  t.services.reserve(n);
  for (std::size_t k = 0; k < n; ++k) t.services.push_back(service_name(k));
  t.depth.assign(n, 0);
  t.outgoing.assign(n, {});

  // Base latency per service, log-uniform in [2, 6] ms.
  std::vector<double> base(n);
  for (auto& b : base) b = std::exp(std::log(2000.0) + uniform01(rng) * std::log(3.0));
  t.entry_latency_us = base[0];

  std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
  auto add_edge = [&](std::size_t from, std::size_t to, double lo, double hi) {
    TopologyEdge e;
    e.from = from;
    e.to = to;
    e.routing_prob = lo + (hi - lo) * uniform01(rng);
    e.base_latency_us = base[to] * (0.9 + 0.2 * uniform01(rng));
    e.error_prob = 0.02 * uniform01(rng);
    e.timeout_prob = 0.005 * uniform01(rng);
    linked[from][to] = true;
    t.outgoing[from].push_back(t.edges.size());
    t.edges.push_back(e);
  };

  int deepest = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const int upper = std::min(spec.max_depth, deepest + 1);
    const int d = 1 + static_cast<int>(uniform01(rng) * upper);
    t.depth[k] = d;
    deepest = std::max(deepest, d);
    std::vector<std::size_t> parents;
    for (std::size_t p = 0; p < k; ++p) {
      if (t.depth[p] == d - 1) parents.push_back(p);
    }
    const auto pick = static_cast<std::size_t>(uniform01(rng) * parents.size());
    add_edge(parents[pick], k, 0.7, 1.0);
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (t.depth[u] >= t.depth[v] || linked[u][v]) continue;
      if (uniform01(rng) < spec.edge_density) add_edge(u, v, 0.1, 0.4);
    }
  }
  return t;
}

void TraceWorkload::validate() const {
  if (rate < 0) throw Error(ErrorCode::kConfig, "synth.rate must be >= 0");
  if (n_windows < 0) throw Error(ErrorCode::kConfig, "synth.n_windows must be >= 0");
  if (window_length_us <= 0) {
    throw Error(ErrorCode::kConfig, "window.length_us must be > 0");
  }
}

std::vector<SpanRecord> generate_traces(const Topology& topology,
                                        const TraceWorkload& workload) {
  workload.validate();
  std::mt19937_64 rng(workload.seed);
  std::vector<SpanRecord> out;
  TraceEmitter emitter(topology, rng, out);
  const auto length = static_cast<double>(workload.window_length_us);
  for (int w = 0; w < workload.n_windows; ++w) {
    const std::int64_t begin = workload.origin_us + w * workload.window_length_us;
    for (int k = 0; k < workload.rate; ++k) {
      const auto offset = static_cast<std::int64_t>(uniform01(rng) * length);
      emitter.emit_trace(begin + offset);
    }
  }
  return out;
}

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kLatencySpike: return "latency_spike";
    case AnomalyKind::kErrorBurst: return "error_burst";
    case AnomalyKind::kCascade: return "cascade";
  }
  return "?";
}

AnomalyKind anomaly_kind_from_string(std::string_view s) {
  if (s == "latency_spike") return AnomalyKind::kLatencySpike;
  if (s == "error_burst") return AnomalyKind::kErrorBurst;
  if (s == "cascade") return AnomalyKind::kCascade;
  throw Error(ErrorCode::kConfig, "unknown anomaly kind '" + std::string(s) + "'");
}

void AnomalySpec::validate() const {
  if (kind == AnomalyKind::kErrorBurst) {
    if (!(magnitude >= 0.0 && magnitude <= 1.0)) {
      throw Error(ErrorCode::kConfig, "error_burst magnitude must be in [0, 1]");
    }
  } else if (!(magnitude >= 1.0) || !std::isfinite(magnitude)) {
    throw Error(ErrorCode::kConfig, "latency magnitude must be >= 1");
  }
  if (cascade_depth < 0) throw Error(ErrorCode::kConfig, "cascade_depth must be >= 0");
}

InjectionResult inject_anomaly(std::vector<SpanRecord> spans, const Topology& topology,
                               const AnomalySpec& spec, std::int64_t window_length_us) {
  spec.validate();
  const auto target = topology.index_of(spec.target);
  if (!target) {
    throw Error(ErrorCode::kInput, "unknown anomaly target '" + spec.target + "'");
  }
  const auto windows = trace_windows(spans, window_length_us);
  if (windows.empty() && !spec.affected_windows.empty()) {
    throw Error(ErrorCode::kInput, "anomaly windows given for an empty corpus");
  }
  if (!windows.empty()) {
    std::int64_t lo = windows.begin()->second;
    std::int64_t hi = lo;
    for (const auto& [id, w] : windows) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    for (std::int64_t w : spec.affected_windows) {
      if (w < lo || w > hi) {
        throw Error(ErrorCode::kInput,
                    "anomaly window " + std::to_string(w) + " outside corpus range [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
    }
  }

  const int max_hops = spec.kind == AnomalyKind::kCascade ? spec.cascade_depth : 0;
  std::map<std::string, double> factor;  // service -> latency multiplier
  for (const auto& [idx, hop] : topology.downstream(*target, max_hops)) {
    factor[topology.services[idx]] =
        1.0 + (spec.magnitude - 1.0) * std::pow(kCascadeDecay, hop);
  }

  std::mt19937_64 rng(spec.seed);
  std::set<AnomalyLabel> labels;
  for (auto& s : spans) {
    auto w = windows.find(s.trace_id);
    if (w == windows.end() || !spec.affected_windows.contains(w->second)) continue;
    auto f = factor.find(s.service_name);
    if (f == factor.end()) continue;
    if (spec.kind == AnomalyKind::kErrorBurst) {
      if (uniform01(rng) < spec.magnitude) s.tags["error"] = "true";
    } else {
      s.duration = scaled_duration(s.duration, f->second);
    }
    labels.insert({w->second, s.service_name, spec.kind});
  }
  return {std::move(spans), {labels.begin(), labels.end()}};
}

void ScalingSpec::validate() const {
  if (!(frequency >= 0.0) || !std::isfinite(frequency)) {
    throw Error(ErrorCode::kConfig, "scaling.frequency must be >= 0");
  }
  if (!(jitter_magnitude >= 0.0) || !std::isfinite(jitter_magnitude)) {
    throw Error(ErrorCode::kConfig, "scaling.jitter_magnitude must be >= 0");
  }
  if (affected_duration_windows < 1) {
    throw Error(ErrorCode::kConfig, "scaling.affected_duration_windows must be >= 1");
  }
}

std::vector<std::int64_t> poisson_event_times(double per_hour, std::int64_t begin_us,
                                              std::int64_t end_us, std::uint64_t seed) {
  std::vector<std::int64_t> out;
  if (per_hour <= 0.0 || end_us <= begin_us) return out;
  const double rate_per_us = per_hour / 3.6e9;
  std::mt19937_64 rng(seed);
  double t = static_cast<double>(begin_us);
  while (true) {
    t += -std::log1p(-uniform01(rng)) / rate_per_us;
    if (t >= static_cast<double>(end_us)) break;
    out.push_back(static_cast<std::int64_t>(t));
  }
  return out;
}

ScalingResult apply_scaling(std::vector<SpanRecord> spans, const Topology& topology,
                            const ScalingSpec& spec, std::int64_t window_length_us,
                            std::int64_t begin_us, std::int64_t end_us) {
  spec.validate();
  ScalingResult result;
  std::mt19937_64 pick(derive_seed(spec.seed, 1));
  for (std::int64_t t : poisson_event_times(spec.frequency, begin_us, end_us, spec.seed)) {
    ScalingEvent ev;
    ev.time_us = t;
    ev.service = topology.services[static_cast<std::size_t>(
        uniform01(pick) * static_cast<double>(topology.services.size()))];
    ev.latency_factor = spec.jitter_magnitude;
    ev.throughput_factor = 0.5 + uniform01(pick);
    ev.first_window = window_of(t, window_length_us);
    ev.last_window = ev.first_window + spec.affected_duration_windows - 1;
    result.events.push_back(std::move(ev));
  }
  if (result.events.empty()) {
    result.spans = std::move(spans);
    return result;
  }

  const auto windows = trace_windows(spans, window_length_us);
  std::mt19937_64 rng(derive_seed(spec.seed, 2));
  std::size_t n_copies = 0;  // keeps duplicated ids unique across events
  for (auto& original : group_by_trace(std::move(spans))) {
    auto w = windows.find(original.front().trace_id);
    std::vector<std::vector<SpanRecord>> batch;
    batch.push_back(std::move(original));
    if (w != windows.end()) {
      for (const auto& ev : result.events) {
        if (w->second < ev.first_window || w->second > ev.last_window) continue;
        // Whole-trace copies join the batch after this event so `trace`
        // stays a valid reference.
        std::vector<std::vector<SpanRecord>> whole_copies;
        for (std::size_t b = 0; b < batch.size(); ++b) {
          std::vector<SpanRecord>& trace = batch[b];
          std::vector<bool> removed(trace.size(), false);
          std::vector<SpanRecord> clones;
          const std::size_t n_spans = trace.size();
          for (std::size_t k = 0; k < n_spans; ++k) {
            if (removed[k] || trace[k].service_name != ev.service) continue;
            trace[k].duration = scaled_duration(trace[k].duration, ev.latency_factor);
            const double u = uniform01(rng);
            const double f = ev.throughput_factor;
            if (f < 1.0 && u < 1.0 - f) {
              for (std::size_t i : subtree(trace, k)) removed[i] = true;
            } else if (f > 1.0 && u < f - 1.0) {
              const std::string suffix = "-d" + std::to_string(++n_copies);
              const bool whole = trace[k].is_root();
              std::vector<SpanRecord> copy;
              for (std::size_t i : subtree(trace, k)) {
                SpanRecord c = trace[i];
                c.span_id += suffix;
                if (c.parent_span_id && i != k) *c.parent_span_id += suffix;
                if (whole) c.trace_id += suffix;
                copy.push_back(std::move(c));
              }
              if (whole) {
                whole_copies.push_back(std::move(copy));
              } else {
                for (auto& c : copy) clones.push_back(std::move(c));
              }
            }
          }
          std::vector<SpanRecord> kept;
          kept.reserve(trace.size() + clones.size());
          for (std::size_t k = 0; k < trace.size(); ++k) {
            if (!removed[k]) kept.push_back(std::move(trace[k]));
          }
          for (auto& c : clones) kept.push_back(std::move(c));
          trace = std::move(kept);
        }
        for (auto& c : whole_copies) batch.push_back(std::move(c));
      }
    }
    for (auto& trace : batch) {
      for (auto& s : trace) result.spans.push_back(std::move(s));
    }
  }
  return result;
}

void write_labels_csv(std::ostream& out, const std::vector<AnomalyLabel>& labels) {
  out << "window_index,service_name,kind\n";
  for (const auto& l : labels) {
    out << l.window_index << ',' << l.service << ',' << to_string(l.kind) << '\n';
  }
}

void write_events_csv(std::ostream& out, const std::vector<ScalingEvent>& events) {
  out << "time_us,service_name,latency_factor,throughput_factor,first_window,"
         "last_window\n";
  for (const auto& e : events) {
    out << e.time_us << ',' << e.service << ',' << format_double(e.latency_factor)
        << ',' << format_double(e.throughput_factor) << ',' << e.first_window << ','
        << e.last_window << '\n';
  }
}

std::vector<AnomalyLabel> read_labels_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<AnomalyLabel> out;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("window_index", 0) == 0) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) {
      throw Error(ErrorCode::kInput,
                  "labels line " + std::to_string(line_no) + ": expected 3 fields");
    }
    AnomalyLabel l;
    try {
      std::size_t used = 0;
      l.window_index = std::stoll(line.substr(0, c1), &used);
      if (used != c1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInput,
                  "labels line " + std::to_string(line_no) + ": bad window_index");
    }
    l.service = line.substr(c1 + 1, c2 - c1 - 1);
    try {
      l.kind = anomaly_kind_from_string(line.substr(c2 + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::kInput,
                  "labels line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::string topology_to_json(const Topology& topology) {
  JsonWriter w;
  w.begin_object();
  w.key("services").begin_array();
  for (std::size_t k = 0; k < topology.services.size(); ++k) {
    w.begin_object();
    w.key("name").value(topology.services[k]);
    w.key("depth").value(topology.depth[k]);
    w.end_object();
  }
  w.end_array();
  w.key("entry").value(topology.services[topology.entry]);
  w.key("entry_latency_us").value(topology.entry_latency_us);
  w.key("edges").begin_array();
  for (const auto& e : topology.edges) {
    w.begin_object();
    w.key("from").value(topology.services[e.from]);
    w.key("to").value(topology.services[e.to]);
    w.key("routing_prob").value(e.routing_prob);
    w.key("base_latency_us").value(e.base_latency_us);
    w.key("error_prob").value(e.error_prob);
    w.key("timeout_prob").value(e.timeout_prob);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

}  // namespace tracegraph
