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
#include <ostream>
#include <string>
#include <vector>

#include "tracegraph/detector.hpp"
#include "tracegraph/metrics.hpp"
#include "tracegraph/model.hpp"
#include "tracegraph/synth.hpp"

namespace tracegraph {

/// Desk-scale detection benchmark: one synthetic corpus split into
/// consecutive train / validation / test windows, with latency anomalies
/// injected into the test windows only.
struct BenchmarkSpec {
  TopologySpec topology;
  int rate = 200;
  int n_train = 40;
  int n_val = 5;
  int n_test = 15;
  double anomaly_fraction = 0.1;  // of test (window, service) cells
  AnomalyKind anomaly_kind = AnomalyKind::kLatencySpike;
  double anomaly_magnitude = 8.0;
  int cascade_depth = 0;
  ScalingSpec scaling;  // applied to test windows
  WindowConfig window;
  ModelConfig model;
  TrainConfig train{.epochs = 60, .learning_rate = 0.2, .weight_decay = 1e-4,
                    .threshold_quantile = 0.99};

  int n_windows() const { return n_train + n_val + n_test; }
  void validate() const;
};

struct PreparedBenchmark {
  std::vector<PreparedGraph> train;
  std::vector<PreparedGraph> val;
  std::vector<PreparedGraph> test;
  std::vector<AnomalyLabel> labels;
  std::vector<ScalingEvent> events;
  FeatureStats stats;
  std::uint64_t model_seed = 0;
};

/// Generates, injects, disturbs, builds and standardizes (with train-window
/// stats) the corpus for one seed. Every random stream derives from `seed`.
PreparedBenchmark prepare_benchmark(const BenchmarkSpec& spec, std::uint64_t seed);

struct BenchmarkOutcome {
  std::vector<ScoredCell> cells;  // test (window, service) cells
  double threshold = 0.0;         // quantile of validation node scores
  double auc = 0.0;
  ClassificationMetrics metrics;
};

/// Trains on the train windows (model seed from the prepared corpus), sets
/// the threshold on validation scores and scores the test windows.
BenchmarkOutcome evaluate_benchmark(const PreparedBenchmark& data, ModelConfig model,
                                    const TrainConfig& train_cfg);

BenchmarkOutcome run_benchmark(const BenchmarkSpec& spec, std::uint64_t seed);

struct SweepRow {
  double param_value = 0.0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double accuracy = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct SweepSummaryRow {
  double param_value = 0.0;
  double mean_auc = 0.0;
  double mean_accuracy = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;  // population std over seeds
};

struct SweepResult {
  std::string parameter;
  std::vector<double> grid;  // ascending
  std::vector<std::uint64_t> seeds;
  std::vector<SweepRow> rows;  // grid-major, seeds in given order

  std::vector<SweepSummaryRow> summary() const;
  /// Summary row for `value`; throws kInput if it is not on the grid.
  SweepSummaryRow at(double value) const;
};

inline const std::vector<double> kDefaultWeightDecayGrid{1e-6, 1e-5, 1e-4,
                                                         1e-3, 1e-2, 1e-1};
inline const std::vector<double> kDefaultScalingGrid{0.0, 2.0, 8.0, 32.0};
inline const std::vector<std::uint64_t> kDefaultSweepSeeds{1, 2, 3};

SweepResult run_weight_decay_sweep(const BenchmarkSpec& spec, std::vector<double> grid,
                                   const std::vector<std::uint64_t>& seeds);
SweepResult run_scaling_sweep(const BenchmarkSpec& spec, std::vector<double> grid,
                              const std::vector<std::uint64_t>& seeds);

void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_sweep_summary_csv(std::ostream& out, const SweepResult& result);

}  // namespace tracegraph
