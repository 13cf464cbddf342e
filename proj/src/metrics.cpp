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

#include "tracegraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tracegraph/error.hpp"
#include "tracegraph/json_writer.hpp"

namespace tracegraph {

double roc_auc(const std::vector<ScoredCell>& cells) {
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& c : cells) {
    if (!std::isfinite(c.score)) throw Error(ErrorCode::kInput, "auc: non-finite score");
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cells[a].score < cells[b].score; });

  // Twice the positive rank sum, kept in integers: a tie group spanning
  // ranks p..q contributes p + q per positive member.
  std::uint64_t rank_sum2 = 0;
  std::uint64_t n1 = 0;
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    while (hi + 1 < order.size() && cells[order[hi + 1]].score == cells[order[lo]].score) {
      ++hi;
    }
    std::uint64_t positives = 0;
    for (std::size_t k = lo; k <= hi; ++k) positives += cells[order[k]].anomalous ? 1 : 0;
    rank_sum2 += positives * (lo + 1 + hi + 1);
    n1 += positives;
    lo = hi + 1;
  }
  const std::uint64_t n0 = cells.size() - n1;
  if (n1 == 0 || n0 == 0) {
    throw Error(ErrorCode::kInput, "auc needs both anomalous and normal cells (got " +
                                       std::to_string(n1) + " anomalous, " +
                                       std::to_string(n0) + " normal)");
  }
  const std::uint64_t u2 = rank_sum2 - n1 * (n1 + 1);
  return static_cast<double>(u2) / static_cast<double>(2 * n1 * n0);
}

ClassificationMetrics classify(const std::vector<ScoredCell>& cells, double threshold) {
  ClassificationMetrics m;
  for (const auto& c : cells) {
    const bool flagged = c.score > threshold;
    if (flagged && c.anomalous) ++m.tp;
    else if (flagged) ++m.fp;
    else if (c.anomalous) ++m.fn;
    else ++m.tn;
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  m.accuracy = ratio(m.tp + m.tn, cells.size());
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

void write_scores_csv(std::ostream& out, const std::vector<ScoredCell>& cells) {
  out << "window_index,service,score,label\n";
  for (const auto& c : cells) {
    out << c.window_index << ',' << c.service << ',' << format_double(c.score) << ','
        << (c.anomalous ? 1 : 0) << '\n';
  }
}

std::vector<ScoredCell> read_scores_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ScoredCell> out;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("window_index", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    const auto bad = [&](const std::string& why) {
      return Error(ErrorCode::kInput, "scores line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 4) throw bad("expected 4 fields");
    ScoredCell c;
    try {
      std::size_t used = 0;
      c.window_index = std::stoll(f[0], &used);
      if (used != f[0].size()) throw bad("bad window_index");
      c.score = std::stod(f[2], &used);
      if (used != f[2].size() || !std::isfinite(c.score)) throw bad("bad score");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw bad("bad number");
    }
    if (f[3] != "0" && f[3] != "1") throw bad("label must be 0 or 1");
    c.service = f[1];
    c.anomalous = f[3] == "1";
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace tracegraph
