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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace tracegraph::oracle {

Tensor2 random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                      double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor2 t(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t(i, j) = u(rng);
  }
  return t;
}

Tensor2 naive_matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("naive_matmul shapes");
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

double max_fd_error(const std::function<double(const std::vector<Tensor2>&)>& f,
                    const std::vector<Tensor2>& inputs,
                    const std::vector<Tensor2>& analytic, double eps) {
  if (inputs.size() != analytic.size()) throw std::invalid_argument("fd: arity");
  double worst = 0.0;
  std::vector<Tensor2> probe = inputs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].rows(); ++i) {
      for (std::size_t j = 0; j < inputs[t].cols(); ++j) {
        const double x = inputs[t](i, j);
        probe[t](i, j) = x + eps;
        const double up = f(probe);
        probe[t](i, j) = x - eps;
        const double down = f(probe);
        probe[t](i, j) = x;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[t](i, j);
        worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
      }
    }
  }
  return worst;
}

double project(const Tensor2& out, const Tensor2& proj) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) s += out(i, j) * proj(i, j);
  }
  return s;
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// sum_k v[k] * m(k, j)
double dot_col(const std::vector<double>& v, const Tensor2& m, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) s += v[k] * m(k, j);
  return s;
}

}  // namespace

std::vector<double> gru_step_scalar(const std::vector<double>& z,
                                    const std::vector<double>& h, const GruWeights& w) {
  const std::size_t n = h.size();
  std::vector<double> r(n), g(n), rh(n), out(n);
  for (std::size_t j = 0; j < n; ++j) {
    r[j] = logistic(dot_col(z, w.W_r, j) + dot_col(h, w.U_r, j) + w.b_r(0, j));
    g[j] = logistic(dot_col(z, w.W_z, j) + dot_col(h, w.U_z, j) + w.b_z(0, j));
    rh[j] = r[j] * h[j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double c = std::tanh(dot_col(z, w.W_h, j) + dot_col(rh, w.U_h, j) + w.b_h(0, j));
    out[j] = (1.0 - g[j]) * c + g[j] * h[j];
  }
  return out;
}

Tensor2 gcn_linear_oracle(const Tensor2& a_hat, const Tensor2& x, const Tensor2& proj,
                          const std::vector<Tensor2>& weights) {
  Tensor2 power = Tensor2::identity(a_hat.rows());
  for (std::size_t l = 0; l < weights.size(); ++l) power = naive_matmul(power, a_hat);
  Tensor2 out = naive_matmul(naive_matmul(power, x), proj);
  for (const auto& w : weights) out = naive_matmul(out, w);
  return out;
}

Tensor2 normalized_adjacency_oracle(const Tensor2& a) {
  const std::size_t n = a.rows();
  Tensor2 b(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool linked = i == j || a(i, j) != 0.0 || a(j, i) != 0.0;
      b(i, j) = linked ? 1.0 : 0.0;
    }
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) deg[i] += b(i, j);
  }
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = b(i, j) / std::sqrt(deg[i] * deg[j]);
  }
  return out;
}

std::vector<double> symmetric_eigenvalues(Tensor2 m) {
  const std::size_t n = m.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(m(p, q)) < 1e-300) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = m(i, i);
  std::sort(out.begin(), out.end());
  return out;
}

double squared_distance(const Tensor2& u, std::size_t row, const std::vector<double>& mu) {
  double s = 0.0;
  for (std::size_t c = 0; c < mu.size(); ++c) {
    const double d = u(row, c) - mu[c];
    s += d * d;
  }
  return s;
}

std::vector<double> mean_rows(const std::vector<Tensor2>& tensors) {
  std::vector<double> sum;
  std::size_t n = 0;
  for (const auto& t : tensors) {
    if (t.rows() == 0) continue;
    sum.resize(t.cols(), 0.0);
    for (std::size_t i = 0; i < t.rows(); ++i) {
      for (std::size_t c = 0; c < t.cols(); ++c) sum[c] += t(i, c);
    }
    n += t.rows();
  }
  for (double& v : sum) v /= static_cast<double>(n);
  return sum;
}

double brute_force_auc(const std::vector<ScoredCell>& cells) {
  double wins = 0.0;
  double pairs = 0.0;
  for (const auto& a : cells) {
    if (!a.anomalous) continue;
    for (const auto& b : cells) {
      if (b.anomalous) continue;
      pairs += 1.0;
      if (a.score > b.score) wins += 1.0;
      else if (a.score == b.score) wins += 0.5;
    }
  }
  if (pairs == 0.0) throw std::invalid_argument("single class");
  return wins / pairs;
}

namespace {

void collect_paths(const TraceTree& t, std::size_t node, std::vector<std::string>& prefix,
                   std::set<std::vector<std::string>>& out) {
  prefix.push_back(t.spans[node].service_name);
  if (t.children[node].empty()) out.insert(prefix);
  for (std::size_t c : t.children[node]) collect_paths(t, c, prefix, out);
  prefix.pop_back();
}

// True when `a` must be listed before `b`.
bool precedes(const OraclePath& a, const OraclePath& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.services.size() != b.services.size()) return a.services.size() < b.services.size();
  return a.services < b.services;
}

}  // namespace

std::vector<OraclePath> exhaustive_ranking(const std::vector<TraceTree>& trees,
                                           const std::map<std::string, double>& scores) {
  std::set<std::vector<std::string>> unique;
  for (const auto& t : trees) {
    std::vector<std::string> prefix;
    collect_paths(t, t.root, prefix, unique);
  }
  std::vector<OraclePath> paths;
  for (const auto& services : unique) {
    double s = 0.0;
    for (const auto& svc : services) s += scores.at(svc);
    paths.push_back({services, s / static_cast<double>(services.size())});
  }
  std::vector<OraclePath> out(paths.size());
  for (const auto& p : paths) {
    std::size_t before = 0;
    for (const auto& q : paths) before += precedes(q, p) ? 1 : 0;
    out[before] = p;
  }
  return out;
}

std::vector<std::int64_t> poisson_replay(double per_hour, std::int64_t begin_us,
                                         std::int64_t end_us, std::uint64_t seed) {
  std::vector<std::int64_t> out;
  if (per_hour <= 0.0) return out;
  std::mt19937_64 rng(seed);
  const double mean_gap_us = 3.6e9 / per_hour;
  double t = static_cast<double>(begin_us);
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) / 9007199254740992.0;
    t += -std::log(1.0 - u) * mean_gap_us;
    if (!(t < static_cast<double>(end_us))) break;
    out.push_back(static_cast<std::int64_t>(t));
  }
  return out;
}

SpanRecord make_span(std::string trace, std::string id, std::optional<std::string> parent,
                     std::string service, std::int64_t start, std::int64_t duration,
                     std::map<std::string, std::string> tags) {
  SpanRecord s;
  s.trace_id = std::move(trace);
  s.span_id = std::move(id);
  s.parent_span_id = std::move(parent);
  s.service_name = std::move(service);
  s.operation_name = "op";
  s.start_ts = start;
  s.duration = duration;
  s.tags = std::move(tags);
  return s;
}

}  // namespace tracegraph::oracle
