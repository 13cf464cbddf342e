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

// tracegraph command line: synth -> ingest -> build-graphs -> train -> score
// -> trace -> eval. Every subcommand writes fixed file names under --out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tracegraph/benchmark.hpp"
#include "tracegraph/detector.hpp"
#include "tracegraph/error.hpp"
#include "tracegraph/json_writer.hpp"
#include "tracegraph/metrics.hpp"
#include "tracegraph/pipeline.hpp"
#include "tracegraph/run_config.hpp"
#include "tracegraph/spans.hpp"
#include "tracegraph/synth.hpp"

namespace fs = std::filesystem;
using namespace tracegraph;

namespace {

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out = ".";
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonOptions& opt) {
  app->add_option("--config", opt.config, "JSON config file (nested or dotted keys)");
  app->add_option_function<std::uint64_t>(
      "--seed",
      [&opt](const std::uint64_t& s) {
        opt.seed = s;
        opt.seed_given = true;
      },
      "master seed");
  app->add_option("--out", opt.out, "output directory")->capture_default_str();
  app->add_option("--set", opt.sets, "override a config key: key=value (repeatable)");
}

RunConfig load_config(const CommonOptions& opt) {
  RunConfig cfg;
  if (!opt.config.empty()) cfg.merge_json_file(opt.config);
  for (const auto& s : opt.sets) cfg.set_assignment(s);
  if (opt.seed_given) cfg.set("seed", std::to_string(opt.seed));
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path out_path(const CommonOptions& opt, const char* name) {
  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + opt.out + ": " + ec.message());
  return fs::path(opt.out) / name;
}

template <typename Fn>
void write_output(const CommonOptions& opt, const char* name, Fn fn) {
  const fs::path path = out_path(opt, name);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  fn(out);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<SpanRecord> load_spans(const std::string& path, bool strict) {
  auto parsed = parse_spans_file(path);
  if (strict && !parsed.rejects.empty()) {
    const auto& r = parsed.rejects.front();
    throw Error(ErrorCode::kInput, path + " line " + std::to_string(r.line_no) + ": " +
                                       r.reason);
  }
  return std::move(parsed.spans);
}

void report_trace_errors(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "WARN E_TRACE: " << e << '\n';
}

int cmd_synth(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  const Topology topology = generate_topology(cfg.topology());
  const TraceWorkload workload = cfg.workload();
  auto spans = generate_traces(topology, workload);
  std::vector<AnomalyLabel> labels;
  if (const auto anomaly = cfg.anomaly()) {
    auto injected = inject_anomaly(std::move(spans), topology, *anomaly,
                                   workload.window_length_us);
    spans = std::move(injected.spans);
    labels = std::move(injected.labels);
  }
  const std::int64_t begin = workload.origin_us;
  const std::int64_t end = begin + workload.n_windows * workload.window_length_us;
  auto scaled = apply_scaling(std::move(spans), topology, cfg.scaling(),
                              workload.window_length_us, begin, end);
  write_output(opt, "spans.ndjson", [&](std::ostream& o) { write_spans(o, scaled.spans); });
  write_output(opt, "labels.csv", [&](std::ostream& o) { write_labels_csv(o, labels); });
  write_output(opt, "events.csv",
               [&](std::ostream& o) { write_events_csv(o, scaled.events); });
  write_output(opt, "topology.json",
               [&](std::ostream& o) { o << topology_to_json(topology) << '\n'; });
  std::cout << "spans " << scaled.spans.size() << " labels " << labels.size()
            << " events " << scaled.events.size() << '\n';
  return 0;
}

int cmd_ingest(const CommonOptions& opt, const std::string& input) {
  load_config(opt);
  const auto parsed = parse_spans_file(input);
  write_output(opt, "spans.ndjson", [&](std::ostream& o) { write_spans(o, parsed.spans); });
  write_output(opt, "rejects.ndjson",
               [&](std::ostream& o) { write_rejects(o, parsed.rejects); });
  std::cout << "accepted " << parsed.spans.size() << " rejected " << parsed.rejects.size()
            << '\n';
  return 0;
}

int cmd_build(const CommonOptions& opt, const std::string& input) {
  const RunConfig cfg = load_config(opt);
  auto built = build_graphs(load_spans(input, true), cfg.window());
  report_trace_errors(built.errors);
  write_output(opt, "graphs.json",
               [&](std::ostream& o) { o << graphs_to_json(built.graphs) << '\n'; });
  std::cout << "windows " << built.graphs.size() << " invalid_traces "
            << built.errors.size() << '\n';
  return 0;
}

int cmd_train(const CommonOptions& opt, const std::string& graphs_path) {
  const RunConfig cfg = load_config(opt);
  Detector det;
  det.window = cfg.window();
  det.model = cfg.model();
  const TrainConfig train_cfg = cfg.train();
  const auto raw = graphs_from_json(read_file(graphs_path));
  if (det.window.standardization == Standardization::kZScore) {
    det.stats = compute_feature_stats(raw);
  }
  const auto windows = prepare_windows(raw, det.window, det.stats);
  TrainResult result = train(windows, det.model, train_cfg);
  std::vector<double> scores;
  for (const auto& g : windows) {
    const auto s = node_scores(forward(g, result.params, det.model).u, result.centroid);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  det.params = std::move(result.params);
  det.centroid = result.centroid;
  det.threshold = select_threshold(std::move(scores), train_cfg.threshold_quantile);
  write_output(opt, "model.json", [&](std::ostream& o) { o << det.to_json() << '\n'; });
  write_output(opt, "train_trace.csv",
               [&](std::ostream& o) { write_training_trace_csv(o, result.trace); });
  std::cout << "epochs " << train_cfg.epochs << " final_loss "
            << format_double(result.trace.back().loss) << " threshold "
            << format_double(det.threshold) << '\n';
  return 0;
}

Detector load_detector(const std::string& path) { return Detector::from_json(read_file(path)); }

int cmd_score(const CommonOptions& opt, const std::string& graphs_path,
              const std::string& model_path, const std::string& labels_path) {
  load_config(opt);
  const Detector det = load_detector(model_path);
  const auto windows =
      prepare_windows(graphs_from_json(read_file(graphs_path)), det.window, det.stats);
  std::set<std::pair<std::int64_t, std::string>> positive;
  if (!labels_path.empty()) {
    for (const auto& l : read_labels_csv(read_file(labels_path))) {
      positive.emplace(l.window_index, l.service);
    }
  }
  std::vector<ScoreReport> reports;
  std::vector<ScoredCell> cells;
  for (const auto& g : windows) {
    reports.push_back(score_window(g, det));
    for (const auto& [service, score] : reports.back().node_scores) {
      cells.push_back({g.window_index, service, score,
                       positive.contains({g.window_index, service})});
    }
  }
  write_output(opt, "report.json",
               [&](std::ostream& o) { o << reports_to_json(reports) << '\n'; });
  write_output(opt, "scores.csv", [&](std::ostream& o) { write_scores_csv(o, cells); });
  std::size_t flagged = 0;
  for (const auto& r : reports) flagged += r.flagged_nodes.size();
  std::cout << "windows " << reports.size() << " flagged " << flagged << '\n';
  return 0;
}

int cmd_trace(const CommonOptions& opt, const std::string& spans_path,
              const std::string& model_path) {
  const RunConfig cfg = load_config(opt);
  const Detector det = load_detector(model_path);
  auto built = build_graphs(load_spans(spans_path, true), det.window);
  report_trace_errors(built.errors);
  const auto windows = prepare_windows(built.graphs, det.window, det.stats);
  std::vector<ScoreReport> reports;
  const std::vector<TraceTree> none;
  for (const auto& g : windows) {
    auto it = built.trees.find(g.window_index);
    reports.push_back(
        trace_root_cause(g, it == built.trees.end() ? none : it->second, det, cfg.top_k()));
  }
  write_output(opt, "report.json",
               [&](std::ostream& o) { o << reports_to_json(reports) << '\n'; });
  std::cout << "windows " << reports.size() << '\n';
  return 0;
}

int cmd_eval_auc(const CommonOptions& opt, const std::string& scores_path,
                 std::optional<double> threshold) {
  const RunConfig cfg = load_config(opt);
  if (!threshold) threshold = cfg.eval_threshold();
  const auto cells = read_scores_csv(read_file(scores_path));
  if (cells.empty()) throw Error(ErrorCode::kInput, scores_path + " holds no scores");
  JsonWriter w;
  w.begin_object();
  w.key("n").value(static_cast<std::uint64_t>(cells.size()));
  const double auc = roc_auc(cells);
  w.key("auc").value(auc);
  if (threshold) {
    const auto m = classify(cells, *threshold);
    w.key("threshold").value(*threshold);
    w.key("accuracy").value(m.accuracy);
    w.key("precision").value(m.precision);
    w.key("recall").value(m.recall);
    w.key("f1").value(m.f1);
    w.key("tp").value(static_cast<std::uint64_t>(m.tp));
    w.key("fp").value(static_cast<std::uint64_t>(m.fp));
    w.key("tn").value(static_cast<std::uint64_t>(m.tn));
    w.key("fn").value(static_cast<std::uint64_t>(m.fn));
  }
  w.end_object();
  write_output(opt, "metrics.json", [&](std::ostream& o) { o << w.str() << '\n'; });
  std::cout << "auc " << format_double(auc) << '\n';
  return 0;
}

int cmd_sweep(const CommonOptions& opt, bool weight_decay) {
  const RunConfig cfg = load_config(opt);
  const BenchmarkSpec spec = cfg.benchmark();
  const auto seeds = cfg.eval_seeds();
  const SweepResult result =
      weight_decay
          ? run_weight_decay_sweep(spec, cfg.eval_grid(kDefaultWeightDecayGrid), seeds)
          : run_scaling_sweep(spec, cfg.eval_grid(kDefaultScalingGrid), seeds);
  write_output(opt, "sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, result); });
  write_output(opt, "sweep_summary.csv",
               [&](std::ostream& o) { write_sweep_summary_csv(o, result); });
  for (const auto& s : result.summary()) {
    std::cout << result.parameter << ' ' << format_double(s.param_value) << " mean_f1 "
              << format_double(s.mean_f1) << " mean_auc " << format_double(s.mean_auc)
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-graph anomaly detection for microservice call chains"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string input, graphs, model, labels, spans, scores;
  std::optional<double> threshold;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth, opt);

  auto* ingest = app.add_subcommand("ingest", "validate span NDJSON");
  add_common(ingest, opt);
  ingest->add_option("--input", input, "span NDJSON file")->required();

  auto* build = app.add_subcommand("build-graphs", "aggregate spans into window graphs");
  add_common(build, opt);
  build->add_option("--input", input, "span NDJSON file")->required();

  auto* train_cmd = app.add_subcommand("train", "train the detector on graphs.json");
  add_common(train_cmd, opt);
  train_cmd->add_option("--graphs", graphs, "graphs.json from build-graphs")->required();

  auto* score = app.add_subcommand("score", "score every window of graphs.json");
  add_common(score, opt);
  score->add_option("--graphs", graphs, "graphs.json from build-graphs")->required();
  score->add_option("--model", model, "model.json from train")->required();
  score->add_option("--labels", labels, "labels.csv to fill the label column");

  auto* trace = app.add_subcommand("trace", "rank root-cause call paths");
  add_common(trace, opt);
  trace->add_option("--spans", spans, "span NDJSON file")->required();
  trace->add_option("--model", model, "model.json from train")->required();

  auto* eval = app.add_subcommand("eval", "metrics and sensitivity sweeps");
  eval->require_subcommand(1);
  auto* auc = eval->add_subcommand("auc", "AUC and threshold metrics of a scores CSV");
  add_common(auc, opt);
  auc->add_option("--scores", scores, "window_index,service,score,label CSV")->required();
  auc->add_option("--threshold", threshold, "flag scores strictly above this value");
  auto* sweep_wd = eval->add_subcommand("sweep-wd", "weight decay sweep");
  add_common(sweep_wd, opt);
  auto* sweep_sc = eval->add_subcommand("sweep-scaling", "scaling frequency sweep");
  add_common(sweep_sc, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR " << to_string(ErrorCode::kConfig) << ": " << e.what() << '\n';
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(opt);
    if (ingest->parsed()) return cmd_ingest(opt, input);
    if (build->parsed()) return cmd_build(opt, input);
    if (train_cmd->parsed()) return cmd_train(opt, graphs);
    if (score->parsed()) return cmd_score(opt, graphs, model, labels);
    if (trace->parsed()) return cmd_trace(opt, spans, model);
    if (auc->parsed()) return cmd_eval_auc(opt, scores, threshold);
    if (sweep_wd->parsed()) return cmd_sweep(opt, true);
    if (sweep_sc->parsed()) return cmd_sweep(opt, false);
  } catch (const Error& e) {
    std::cerr << "ERROR " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR E_INTERNAL: " << e.what() << '\n';
    return 2;
  }
  std::cerr << "ERROR E_INTERNAL: no subcommand ran\n";
  return 2;
}
