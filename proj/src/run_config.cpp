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

#include "tracegraph/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "tracegraph/error.hpp"

namespace tracegraph {
namespace {

enum class KeyType { kInt, kUint, kDouble, kBool, kString, kIntList, kUintList, kDoubleList };

struct KeySpec {
  KeyType type;
  const char* help;
  std::function<void(const std::string&)> check = nullptr;  // extra validation
};

// Streams for seeds derived from the master seed.
enum SeedStream : std::uint64_t { kTopologySeed, kSynthSeed, kAnomalySeed, kScalingSeed,
                                  kModelSeed };

const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = {
      {"seed", {KeyType::kUint, "master seed; unset module seeds derive from it"}},
      {"window.length_us", {KeyType::kInt, "window length in microseconds"}},
      {"window.history_T", {KeyType::kInt, "edge history length (alias model.history_T)"}},
      {"window.standardization",
       {KeyType::kString, "zscore | none",
        [](const std::string& v) {
          if (v != "zscore" && v != "none") throw std::invalid_argument("zscore or none");
        }}},
      {"model.gcn_layers", {KeyType::kInt, "number of GCN layers"}},
      {"model.hidden_dim", {KeyType::kInt, "GCN width"}},
      {"model.activation",
       {KeyType::kString, "relu | tanh | identity",
        [](const std::string& v) { activation_from_string(v); }}},
      {"model.use_residual", {KeyType::kBool, "residual connections in GCN layers"}},
      {"model.use_layer_norm", {KeyType::kBool, "layer norm in GCN layers"}},
      {"model.gru_hidden", {KeyType::kInt, "GRU state width"}},
      {"model.history_T", {KeyType::kInt, "edge history length (alias window.history_T)"}},
      {"model.seed", {KeyType::kUint, "parameter initialization seed"}},
      {"model.input_dim", {KeyType::kInt, "node feature width"}},
      {"model.edge_dim", {KeyType::kInt, "edge feature width"}},
      {"train.epochs", {KeyType::kInt, "gradient steps"}},
      {"train.learning_rate", {KeyType::kDouble, "gradient descent step size"}},
      {"train.weight_decay", {KeyType::kDouble, "L2 coefficient"}},
      {"train.threshold_quantile", {KeyType::kDouble, "score quantile for the threshold"}},
      {"topology.n_services", {KeyType::kInt, "number of services"}},
      {"topology.edge_density", {KeyType::kDouble, "probability of each extra edge"}},
      {"topology.max_depth", {KeyType::kInt, "depth of the call DAG"}},
      {"topology.seed", {KeyType::kUint, "topology seed"}},
      {"synth.rate", {KeyType::kInt, "traces per window"}},
      {"synth.n_windows", {KeyType::kInt, "number of windows"}},
      {"synth.origin_us", {KeyType::kInt, "start time of window 0"}},
      {"synth.seed", {KeyType::kUint, "trace generation seed"}},
      {"anomaly.kind",
       {KeyType::kString, "latency_spike | error_burst | cascade",
        [](const std::string& v) { anomaly_kind_from_string(v); }}},
      {"anomaly.target", {KeyType::kString, "service to perturb; unset disables injection"}},
      {"anomaly.magnitude", {KeyType::kDouble, "latency multiplier or error probability"}},
      {"anomaly.cascade_depth", {KeyType::kInt, "downstream hops for cascades"}},
      {"anomaly.affected_windows", {KeyType::kIntList, "window indices"}},
      {"anomaly.seed", {KeyType::kUint, "anomaly seed"}},
      {"scaling.frequency", {KeyType::kDouble, "scaling events per hour"}},
      {"scaling.jitter_magnitude", {KeyType::kDouble, "latency multiplier per event"}},
      {"scaling.affected_duration_windows", {KeyType::kInt, "windows per event"}},
      {"scaling.seed", {KeyType::kUint, "scaling seed"}},
      {"bench.rate", {KeyType::kInt, "benchmark traces per window"}},
      {"bench.n_train", {KeyType::kInt, "benchmark training windows"}},
      {"bench.n_val", {KeyType::kInt, "benchmark validation windows"}},
      {"bench.n_test", {KeyType::kInt, "benchmark test windows"}},
      {"bench.anomaly_fraction", {KeyType::kDouble, "share of anomalous test cells"}},
      {"bench.anomaly_kind",
       {KeyType::kString, "latency_spike | error_burst | cascade",
        [](const std::string& v) { anomaly_kind_from_string(v); }}},
      {"bench.anomaly_magnitude", {KeyType::kDouble, "benchmark anomaly magnitude"}},
      {"bench.cascade_depth", {KeyType::kInt, "benchmark cascade depth"}},
      {"trace.top_k", {KeyType::kInt, "ranked paths kept per window"}},
      {"eval.threshold", {KeyType::kDouble, "threshold for eval auc metrics"}},
      {"eval.grid", {KeyType::kDoubleList, "sweep grid"}},
      {"eval.seeds", {KeyType::kUintList, "sweep seeds"}},
  };
  return table;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("integer");
  return v;
}

std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("non-negative integer");
  }
  return v;
}

double parse_double(std::string_view s) {
  const std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v)) {
    throw std::invalid_argument("finite number");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("true or false");
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss{std::string(s)};
  for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
  return out;
}

void check_value(const KeySpec& spec, const std::string& v) {
  switch (spec.type) {
    case KeyType::kInt: parse_int(v); break;
    case KeyType::kUint: parse_uint(v); break;
    case KeyType::kDouble: parse_double(v); break;
    case KeyType::kBool: parse_bool(v); break;
    case KeyType::kString: break;
    case KeyType::kIntList:
      for (const auto& x : split_list(v)) parse_int(x);
      break;
    case KeyType::kUintList:
      for (const auto& x : split_list(v)) parse_uint(x);
      break;
    case KeyType::kDoubleList:
      for (const auto& x : split_list(v)) parse_double(x);
      break;
  }
  if (spec.check) spec.check(v);
}

std::string scalar_text(const std::string& key, const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_number_unsigned()) return std::to_string(j.get<std::uint64_t>());
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  if (j.is_number_float()) return j.dump();
  throw Error(ErrorCode::kConfig, "config key " + key + ": unsupported value " + j.dump());
}

void flatten(const nlohmann::json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten(v, key, out);
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& x : v) {
        if (!joined.empty()) joined += ',';
        joined += scalar_text(key, x);
      }
      out.emplace_back(key, joined);
    } else {
      out.emplace_back(key, scalar_text(key, v));
    }
  }
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::known_keys() {
  static const std::map<std::string, std::string> keys = [] {
    std::map<std::string, std::string> m;
    for (const auto& [k, spec] : key_table()) m.emplace(k, spec.help);
    return m;
  }();
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const std::string k(key);
  auto it = key_table().find(k);
  if (it == key_table().end()) throw Error(ErrorCode::kConfig, "unknown config key '" + k + "'");
  const std::string v(value);
  try {
    check_value(it->second, v);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kConfig,
                "config key " + k + ": invalid value '" + v + "' (" + e.what() + ")");
  }
  values_[k] = v;
}

void RunConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::kConfig,
                "expected key=value, got '" + std::string(assignment) + "'");
  }
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void RunConfig::merge_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  std::vector<std::pair<std::string, std::string>> flat;
  flatten(j, "", flat);
  for (const auto& [k, v] : flat) set(k, v);
}

void RunConfig::merge_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  merge_json(ss.str());
}

bool RunConfig::has(std::string_view key) const { return find(key) != nullptr; }

const std::string* RunConfig::find(std::string_view key) const {
  auto it = values_.find(std::string(key));
  return it == values_.end() ? nullptr : &it->second;
}

std::uint64_t RunConfig::seed() const {
  const auto* v = find("seed");
  return v ? parse_uint(*v) : 1;
}

namespace {

template <typename T>
void apply_int(const std::string* v, T& out) {
  if (v) out = static_cast<T>(parse_int(*v));
}

}  // namespace

WindowConfig RunConfig::window() const {
  WindowConfig w;
  if (auto* v = find("window.length_us")) w.window_length_us = parse_int(*v);
  const auto* wt = find("window.history_T");
  const auto* mt = find("model.history_T");
  if (wt && mt && parse_int(*wt) != parse_int(*mt)) {
    throw Error(ErrorCode::kConfig, "window.history_T " + *wt +
                                        " differs from model.history_T " + *mt);
  }
  if (wt) w.history_T = static_cast<int>(parse_int(*wt));
  else if (mt) w.history_T = static_cast<int>(parse_int(*mt));
  if (auto* v = find("window.standardization")) {
    w.standardization = *v == "none" ? Standardization::kNone : Standardization::kZScore;
  }
  w.validate();
  return w;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  apply_int(find("model.gcn_layers"), m.gcn_layers);
  apply_int(find("model.hidden_dim"), m.hidden_dim);
  if (auto* v = find("model.activation")) m.activation = activation_from_string(*v);
  if (auto* v = find("model.use_residual")) m.use_residual = parse_bool(*v);
  if (auto* v = find("model.use_layer_norm")) m.use_layer_norm = parse_bool(*v);
  apply_int(find("model.gru_hidden"), m.gru_hidden);
  m.history_T = window().history_T;
  m.seed = has("model.seed") ? parse_uint(*find("model.seed"))
                             : derive_seed(seed(), kModelSeed);
  apply_int(find("model.input_dim"), m.input_dim);
  apply_int(find("model.edge_dim"), m.edge_dim);
  m.validate();
  return m;
}

namespace {

void apply_train(const std::map<std::string, std::string>& values, TrainConfig& t) {
  auto get = [&](const char* k) -> const std::string* {
    auto it = values.find(k);
    return it == values.end() ? nullptr : &it->second;
  };
  if (auto* v = get("train.epochs")) t.epochs = static_cast<int>(parse_int(*v));
  if (auto* v = get("train.learning_rate")) t.learning_rate = parse_double(*v);
  if (auto* v = get("train.weight_decay")) t.weight_decay = parse_double(*v);
  if (auto* v = get("train.threshold_quantile")) t.threshold_quantile = parse_double(*v);
  t.validate();
}

}  // namespace

TrainConfig RunConfig::train() const {
  TrainConfig t;
  apply_train(values_, t);
  return t;
}

TopologySpec RunConfig::topology() const {
  TopologySpec t;
  apply_int(find("topology.n_services"), t.n_services);
  if (auto* v = find("topology.edge_density")) t.edge_density = parse_double(*v);
  apply_int(find("topology.max_depth"), t.max_depth);
  t.seed = has("topology.seed") ? parse_uint(*find("topology.seed"))
                                : derive_seed(seed(), kTopologySeed);
  t.validate();
  return t;
}

TraceWorkload RunConfig::workload() const {
  TraceWorkload w;
  apply_int(find("synth.rate"), w.rate);
  apply_int(find("synth.n_windows"), w.n_windows);
  apply_int(find("synth.origin_us"), w.origin_us);
  w.window_length_us = window().window_length_us;
  w.seed = has("synth.seed") ? parse_uint(*find("synth.seed"))
                             : derive_seed(seed(), kSynthSeed);
  w.validate();
  return w;
}

std::optional<AnomalySpec> RunConfig::anomaly() const {
  const auto* target = find("anomaly.target");
  if (!target) {
    for (const auto& [k, v] : values_) {
      if (k.rfind("anomaly.", 0) == 0) {
        throw Error(ErrorCode::kConfig, k + " is set but anomaly.target is not");
      }
    }
    return std::nullopt;
  }
  AnomalySpec a;
  a.target = *target;
  if (auto* v = find("anomaly.kind")) a.kind = anomaly_kind_from_string(*v);
  if (auto* v = find("anomaly.magnitude")) a.magnitude = parse_double(*v);
  apply_int(find("anomaly.cascade_depth"), a.cascade_depth);
  if (auto* v = find("anomaly.affected_windows")) {
    for (const auto& x : split_list(*v)) a.affected_windows.insert(parse_int(x));
  }
  a.seed = has("anomaly.seed") ? parse_uint(*find("anomaly.seed"))
                               : derive_seed(seed(), kAnomalySeed);
  a.validate();
  return a;
}

ScalingSpec RunConfig::scaling() const {
  ScalingSpec s;
  if (auto* v = find("scaling.frequency")) s.frequency = parse_double(*v);
  if (auto* v = find("scaling.jitter_magnitude")) s.jitter_magnitude = parse_double(*v);
  apply_int(find("scaling.affected_duration_windows"), s.affected_duration_windows);
  s.seed = has("scaling.seed") ? parse_uint(*find("scaling.seed"))
                               : derive_seed(seed(), kScalingSeed);
  s.validate();
  return s;
}

BenchmarkSpec RunConfig::benchmark() const {
  BenchmarkSpec b;
  b.topology = topology();
  b.window = window();
  b.model = model();
  apply_train(values_, b.train);
  b.scaling = scaling();
  apply_int(find("bench.rate"), b.rate);
  apply_int(find("bench.n_train"), b.n_train);
  apply_int(find("bench.n_val"), b.n_val);
  apply_int(find("bench.n_test"), b.n_test);
  if (auto* v = find("bench.anomaly_fraction")) b.anomaly_fraction = parse_double(*v);
  if (auto* v = find("bench.anomaly_kind")) b.anomaly_kind = anomaly_kind_from_string(*v);
  if (auto* v = find("bench.anomaly_magnitude")) b.anomaly_magnitude = parse_double(*v);
  apply_int(find("bench.cascade_depth"), b.cascade_depth);
  b.validate();
  return b;
}

std::size_t RunConfig::top_k() const {
  const auto* v = find("trace.top_k");
  if (!v) return 10;
  const auto k = parse_int(*v);
  if (k < 0) throw Error(ErrorCode::kConfig, "trace.top_k must be >= 0");
  return static_cast<std::size_t>(k);
}

std::optional<double> RunConfig::eval_threshold() const {
  const auto* v = find("eval.threshold");
  if (!v) return std::nullopt;
  return parse_double(*v);
}

std::vector<double> RunConfig::eval_grid(const std::vector<double>& fallback) const {
  const auto* v = find("eval.grid");
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& x : split_list(*v)) out.push_back(parse_double(x));
  if (out.empty()) throw Error(ErrorCode::kConfig, "eval.grid is empty");
  return out;
}

std::vector<std::uint64_t> RunConfig::eval_seeds() const {
  const auto* v = find("eval.seeds");
  if (!v) {
    const std::uint64_t s = seed();
    return {s, s + 1, s + 2};
  }
  std::vector<std::uint64_t> out;
  for (const auto& x : split_list(*v)) out.push_back(parse_uint(x));
  if (out.empty()) throw Error(ErrorCode::kConfig, "eval.seeds is empty");
  return out;
}

}  // namespace tracegraph
