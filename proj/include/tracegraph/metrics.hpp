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
#include <ostream>
#include <string>
#include <vector>

namespace tracegraph {

/// One scored (window, service) cell with its ground-truth label.
struct ScoredCell {
  std::int64_t window_index = 0;
  std::string service;
  double score = 0.0;
  bool anomalous = false;

  bool operator==(const ScoredCell&) const = default;
};

/// Area under the ROC curve via the Mann-Whitney U statistic with midranks
/// for ties. Throws kInput unless both classes are present.
double roc_auc(const std::vector<ScoredCell>& cells);

struct ClassificationMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when nothing is flagged
  double recall = 0.0;     // 0 when there are no positives
  double f1 = 0.0;         // 0 when precision + recall is 0
};

/// A cell is predicted anomalous when its score is strictly above `threshold`.
ClassificationMetrics classify(const std::vector<ScoredCell>& cells, double threshold);

void write_scores_csv(std::ostream& out, const std::vector<ScoredCell>& cells);
/// Reads window_index,service,score,label (label 0/1). Throws kInput.
std::vector<ScoredCell> read_scores_csv(const std::string& text);

}  // namespace tracegraph
