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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracegraph/benchmark.hpp"
#include "tracegraph/detector.hpp"
#include "tracegraph/model.hpp"
#include "tracegraph/service_graph.hpp"
#include "tracegraph/synth.hpp"

namespace tracegraph {

/// Flat dotted-key configuration ("train.epochs", "model.hidden_dim", ...).
/// Only keys that were set are stored; the builders below start from the
/// built-in defaults and apply them. Unknown keys and ill-typed values throw
/// kConfig as soon as they are set.
class RunConfig {
 public:
  /// Every accepted key with a one-line description, sorted.
  static const std::map<std::string, std::string>& known_keys();

  /// Merges a JSON object; nested objects flatten to dotted keys.
  void merge_json(const std::string& text);
  void merge_json_file(const std::string& path);
  /// Sets one key from its textual form (as in `--set key=value`).
  void set(std::string_view key, std::string_view value);
  /// Parses "key=value".
  void set_assignment(std::string_view assignment);

  bool has(std::string_view key) const;

  /// Master seed (`seed`, default 1). Per-module seeds that are not set
  /// explicitly are derived from it.
  std::uint64_t seed() const;

  WindowConfig window() const;
  ModelConfig model() const;
  TrainConfig train() const;
  TopologySpec topology() const;
  TraceWorkload workload() const;
  /// Present only when anomaly.target is set.
  std::optional<AnomalySpec> anomaly() const;
  ScalingSpec scaling() const;
  BenchmarkSpec benchmark() const;
  std::size_t top_k() const;
  std::optional<double> eval_threshold() const;
  std::vector<double> eval_grid(const std::vector<double>& fallback) const;
  std::vector<std::uint64_t> eval_seeds() const;

 private:
  // Canonical textual value per key.
  std::map<std::string, std::string> values_;

  const std::string* find(std::string_view key) const;
};

}  // namespace tracegraph
