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
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tracegraph/spans.hpp"

namespace tracegraph {

/// splitmix64 finalizer; derives independent seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Uniform [0, 1) from the top 53 bits of a 64-bit draw.
template <typename Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct TopologySpec {
  int n_services = 30;
  double edge_density = 0.1;
  int max_depth = 4;
  std::uint64_t seed = 42;

  void validate() const;
};

struct TopologyEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double routing_prob = 1.0;    // chance a visit of `from` calls `to`
  double base_latency_us = 0.0; // median duration of the callee span
  double error_prob = 0.0;
  double timeout_prob = 0.0;
};

/// DAG of services rooted at `entry` (index 0). Edges always point from a
/// shallower to a deeper service.
struct Topology {
  std::vector<std::string> services;
  std::vector<int> depth;
  std::vector<TopologyEdge> edges;
  std::vector<std::vector<std::size_t>> outgoing;  // edge indices per service
  std::size_t entry = 0;
  double entry_latency_us = 0.0;

  std::optional<std::size_t> index_of(std::string_view service) const;
  /// Services reachable from `service` in exactly `hops` edges or fewer,
  /// keyed by their minimum hop count (the service itself at 0).
  std::vector<std::pair<std::size_t, int>> downstream(std::size_t service,
                                                      int max_hops) const;
};

Topology generate_topology(const TopologySpec& spec);

struct TraceWorkload {
  int rate = 200;        // traces per window
  int n_windows = 60;
  std::int64_t window_length_us = 60'000'000;
  std::int64_t origin_us = 0;  // start of window 0
  std::uint64_t seed = 1;

  void validate() const;
};

/// Log-normal sigma (log space) of generated span durations.
inline constexpr double kLatencyLogSigma = 0.25;

/// Random root-to-subtree walks over the topology, `rate` per window, spans
/// in pre-order per trace.
std::vector<SpanRecord> generate_traces(const Topology& topology,
                                        const TraceWorkload& workload);

enum class AnomalyKind { kLatencySpike, kErrorBurst, kCascade };
std::string_view to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(std::string_view s);

/// Per-hop decay applied to the latency excess of a cascade.
inline constexpr double kCascadeDecay = 0.5;

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::kLatencySpike;
  std::string target;
  double magnitude = 8.0;  // latency multiplier >= 1, or error probability
  int cascade_depth = 0;
  std::set<std::int64_t> affected_windows;
  std::uint64_t seed = 3;

  void validate() const;
};

struct AnomalyLabel {
  std::int64_t window_index = 0;
  std::string service;
  AnomalyKind kind = AnomalyKind::kLatencySpike;

  auto operator<=>(const AnomalyLabel&) const = default;
};

struct InjectionResult {
  std::vector<SpanRecord> spans;
  std::vector<AnomalyLabel> labels;  // sorted, one per (window, service)
};

/// Mutates spans of the target (and, for cascades, downstream services) in
/// the affected windows. A trace belongs to the window of its root span.
/// Labels are emitted for every affected (window, service) with at least one
/// span, even when the multiplier is 1.
InjectionResult inject_anomaly(std::vector<SpanRecord> spans,
                               const Topology& topology, const AnomalySpec& spec,
                               std::int64_t window_length_us);

struct ScalingSpec {
  double frequency = 0.0;  // events per simulated hour
  double jitter_magnitude = 3.0;
  int affected_duration_windows = 2;
  std::uint64_t seed = 4;

  void validate() const;
};

struct ScalingEvent {
  std::int64_t time_us = 0;
  std::string service;
  double latency_factor = 1.0;
  double throughput_factor = 1.0;
  std::int64_t first_window = 0;
  std::int64_t last_window = 0;
};

struct ScalingResult {
  std::vector<SpanRecord> spans;
  std::vector<ScalingEvent> events;
};

/// Poisson event times in [begin_us, end_us) at `per_hour` events per hour,
/// from a stream seeded with `seed`.
std::vector<std::int64_t> poisson_event_times(double per_hour, std::int64_t begin_us,
                                              std::int64_t end_us, std::uint64_t seed);

/// Elastic-scaling disturbances over [begin_us, end_us). Each event picks a
/// service uniformly, multiplies its span durations by jitter_magnitude, and
/// thins (factor < 1) or duplicates (factor > 1) its spans together with
/// their subtrees, for affected_duration_windows windows.
ScalingResult apply_scaling(std::vector<SpanRecord> spans, const Topology& topology,
                            const ScalingSpec& spec, std::int64_t window_length_us,
                            std::int64_t begin_us, std::int64_t end_us);

void write_labels_csv(std::ostream& out, const std::vector<AnomalyLabel>& labels);
void write_events_csv(std::ostream& out, const std::vector<ScalingEvent>& events);
std::vector<AnomalyLabel> read_labels_csv(const std::string& text);
std::string topology_to_json(const Topology& topology);

}  // namespace tracegraph
