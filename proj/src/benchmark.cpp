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

#include "tracegraph/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <set>

#include "tracegraph/error.hpp"
#include "tracegraph/json_writer.hpp"
#include "tracegraph/pipeline.hpp"

namespace tracegraph {
namespace {

enum Stream : std::uint64_t { kTopology, kTraces, kAnomalyPick, kAnomaly, kScaling, kModel };

std::vector<PreparedGraph> slice(const std::vector<PreparedGraph>& all, int from, int n) {
  return {all.begin() + from, all.begin() + from + n};
}

std::vector<double> window_scores(const std::vector<PreparedGraph>& windows,
                                  const ModelParams& params, const ModelConfig& cfg,
                                  const Centroid& centroid) {
  std::vector<double> out;
  for (const auto& g : windows) {
    const auto s = node_scores(forward(g, params, cfg).u, centroid);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

// Runs fn(k) for k in [0, n) in parallel and rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < n; ++k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<double> sorted_grid(std::vector<double> grid) {
  if (grid.empty()) throw Error(ErrorCode::kConfig, "sweep grid is empty");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

SweepRow row_of(double value, std::uint64_t seed, const BenchmarkOutcome& o) {
  return {value, seed, o.auc, o.metrics.accuracy, o.metrics.recall, o.metrics.f1};
}

}  // namespace

void BenchmarkSpec::validate() const {
  topology.validate();
  if (rate < 1) throw Error(ErrorCode::kConfig, "benchmark.rate must be >= 1");
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw Error(ErrorCode::kConfig, "benchmark splits must each hold >= 1 window");
  }
  if (!(anomaly_fraction > 0.0 && anomaly_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "benchmark.anomaly_fraction must be in (0, 1]");
  }
  AnomalySpec probe;
  probe.kind = anomaly_kind;
  probe.magnitude = anomaly_magnitude;
  probe.cascade_depth = cascade_depth;
  probe.validate();
  scaling.validate();
  window.validate();
  model.validate();
  train.validate();
  if (model.history_T != window.history_T) {
    throw Error(ErrorCode::kConfig, "model.history_T " + std::to_string(model.history_T) +
                                        " differs from window.history_T " +
                                        std::to_string(window.history_T));
  }
}

PreparedBenchmark prepare_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
  spec.validate();
  TopologySpec topo_spec = spec.topology;
  topo_spec.seed = derive_seed(seed, kTopology);
  const Topology topology = generate_topology(topo_spec);

  TraceWorkload workload;
  workload.rate = spec.rate;
  workload.n_windows = spec.n_windows();
  workload.window_length_us = spec.window.window_length_us;
  workload.seed = derive_seed(seed, kTraces);
  auto spans = generate_traces(topology, workload);

  // Anomalous services per test window: a fixed share of all services.
  const int test_first = spec.n_train + spec.n_val;
  const auto n_services = topology.services.size();
  const auto per_window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(spec.anomaly_fraction *
                                               static_cast<double>(n_services))));
  std::mt19937_64 pick(derive_seed(seed, kAnomalyPick));
  PreparedBenchmark out;
  std::set<AnomalyLabel> labels;
  for (int w = test_first; w < spec.n_windows(); ++w) {
    std::vector<std::size_t> pool(n_services);
    for (std::size_t k = 0; k < n_services; ++k) pool[k] = k;
    for (std::size_t k = 0; k < std::min(per_window, n_services); ++k) {
      const auto j = k + static_cast<std::size_t>(uniform01(pick) *
                                                  static_cast<double>(n_services - k));
      std::swap(pool[k], pool[j]);
      AnomalySpec a;
      a.kind = spec.anomaly_kind;
      a.target = topology.services[pool[k]];
      a.magnitude = spec.anomaly_magnitude;
      a.cascade_depth = spec.cascade_depth;
      a.affected_windows = {w};
      a.seed = derive_seed(derive_seed(seed, kAnomaly), labels.size());
      auto injected = inject_anomaly(std::move(spans), topology, a,
                                     spec.window.window_length_us);
      spans = std::move(injected.spans);
      labels.insert(injected.labels.begin(), injected.labels.end());
    }
  }
  out.labels.assign(labels.begin(), labels.end());

  ScalingSpec scaling = spec.scaling;
  scaling.seed = derive_seed(seed, kScaling);
  const auto length = spec.window.window_length_us;
  auto scaled = apply_scaling(std::move(spans), topology, scaling, length,
                              test_first * length, spec.n_windows() * length);
  out.events = std::move(scaled.events);

  auto built = build_graphs(std::move(scaled.spans), spec.window,
                            WindowRange{0, spec.n_windows() - 1});
  if (!built.errors.empty()) {
    throw Error(ErrorCode::kTrace, "benchmark corpus has invalid traces: " +
                                       built.errors.front());
  }
  const std::vector<ServiceGraph> train_raw(built.graphs.begin(),
                                            built.graphs.begin() + spec.n_train);
  out.stats = compute_feature_stats(train_raw);
  const auto all = prepare_windows(built.graphs, spec.window, out.stats);
  out.train = slice(all, 0, spec.n_train);
  out.val = slice(all, spec.n_train, spec.n_val);
  out.test = slice(all, test_first, spec.n_test);
  out.model_seed = derive_seed(seed, kModel);
  return out;
}

BenchmarkOutcome evaluate_benchmark(const PreparedBenchmark& data, ModelConfig model,
                                    const TrainConfig& train_cfg) {
  model.seed = data.model_seed;
  const TrainResult trained = train(data.train, model, train_cfg);
  BenchmarkOutcome out;
  out.threshold = select_threshold(
      window_scores(data.val, trained.params, model, trained.centroid),
      train_cfg.threshold_quantile);
  const std::set<std::pair<std::int64_t, std::string>> positive = [&] {
    std::set<std::pair<std::int64_t, std::string>> s;
    for (const auto& l : data.labels) s.emplace(l.window_index, l.service);
    return s;
  }();
  for (const auto& g : data.test) {
    const auto scores = node_scores(forward(g, trained.params, model).u, trained.centroid);
    for (std::size_t i = 0; i < g.services.size(); ++i) {
      out.cells.push_back({g.window_index, g.services[i], scores[i],
                           positive.contains({g.window_index, g.services[i]})});
    }
  }
  out.auc = roc_auc(out.cells);
  out.metrics = classify(out.cells, out.threshold);
  return out;
}

BenchmarkOutcome run_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
  return evaluate_benchmark(prepare_benchmark(spec, seed), spec.model, spec.train);
}

std::vector<SweepSummaryRow> SweepResult::summary() const {
  std::vector<SweepSummaryRow> out;
  for (double v : grid) {
    SweepSummaryRow s;
    s.param_value = v;
    std::vector<double> f1;
    for (const auto& r : rows) {
      if (r.param_value != v) continue;
      s.mean_auc += r.auc;
      s.mean_accuracy += r.accuracy;
      s.mean_recall += r.recall;
      f1.push_back(r.f1);
    }
    if (f1.empty()) continue;
    const auto n = static_cast<double>(f1.size());
    s.mean_auc /= n;
    s.mean_accuracy /= n;
    s.mean_recall /= n;
    for (double f : f1) s.mean_f1 += f;
    s.mean_f1 /= n;
    for (double f : f1) s.std_f1 += (f - s.mean_f1) * (f - s.mean_f1);
    s.std_f1 = std::sqrt(s.std_f1 / n);
    out.push_back(s);
  }
  return out;
}

SweepSummaryRow SweepResult::at(double value) const {
  for (const auto& s : summary()) {
    if (s.param_value == value) return s;
  }
  throw Error(ErrorCode::kInput, parameter + " " + format_double(value) +
                                     " is not on the sweep grid");
}

SweepResult run_weight_decay_sweep(const BenchmarkSpec& spec, std::vector<double> grid,
                                   const std::vector<std::uint64_t>& seeds) {
  SweepResult result;
  result.parameter = "weight_decay";
  result.grid = sorted_grid(std::move(grid));
  result.seeds = seeds;
  for (double v : result.grid) {
    if (!(v >= 0.0)) throw Error(ErrorCode::kConfig, "weight_decay grid values must be >= 0");
  }
  std::vector<PreparedBenchmark> data(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t s) { data[s] = prepare_benchmark(spec, seeds[s]); });

  const std::size_t n = result.grid.size() * seeds.size();
  result.rows.resize(n);
  parallel_for(n, [&](std::size_t k) {
    const std::size_t g = k / seeds.size();
    const std::size_t s = k % seeds.size();
    TrainConfig cfg = spec.train;
    cfg.weight_decay = result.grid[g];
    result.rows[k] = row_of(result.grid[g], seeds[s],
                            evaluate_benchmark(data[s], spec.model, cfg));
  });
  return result;
}

SweepResult run_scaling_sweep(const BenchmarkSpec& spec, std::vector<double> grid,
                              const std::vector<std::uint64_t>& seeds) {
  SweepResult result;
  result.parameter = "scaling_frequency";
  result.grid = sorted_grid(std::move(grid));
  result.seeds = seeds;
  const std::size_t n = result.grid.size() * seeds.size();
  result.rows.resize(n);
  parallel_for(n, [&](std::size_t k) {
    const std::size_t g = k / seeds.size();
    const std::size_t s = k % seeds.size();
    BenchmarkSpec point = spec;
    point.scaling.frequency = result.grid[g];
    result.rows[k] = row_of(result.grid[g], seeds[s], run_benchmark(point, seeds[s]));
  });
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "param_value,seed,auc,acc,recall,f1\n";
  for (const auto& r : result.rows) {
    out << format_double(r.param_value) << ',' << r.seed << ',' << format_double(r.auc)
        << ',' << format_double(r.accuracy) << ',' << format_double(r.recall) << ','
        << format_double(r.f1) << '\n';
  }
}

void write_sweep_summary_csv(std::ostream& out, const SweepResult& result) {
  out << "param_value,mean_auc,mean_acc,mean_recall,mean_f1,std_f1\n";
  for (const auto& s : result.summary()) {
    out << format_double(s.param_value) << ',' << format_double(s.mean_auc) << ','
        << format_double(s.mean_accuracy) << ',' << format_double(s.mean_recall) << ','
        << format_double(s.mean_f1) << ',' << format_double(s.std_f1) << '\n';
  }
}

}  // namespace tracegraph
