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

#include "tracegraph/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "tracegraph/error.hpp"

namespace tracegraph {

Tensor2 Tensor2::from(std::size_t rows, std::size_t cols,
                      std::vector<double> data) {
  if (data.size() != rows * cols) {
    throw Error(ErrorCode::kDimension,
                "tensor data length " + std::to_string(data.size()) +
                    " does not match shape " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
  Tensor2 t;
  t.rows_ = rows;
  t.cols_ = cols;
  t.data_ = std::move(data);
  if (!t.all_finite()) {
    throw Error(ErrorCode::kNumeric, "tensor contains non-finite entries");
  }
  return t;
}

Tensor2 Tensor2::from_rows(const std::vector<std::vector<double>>& rows,
                           std::size_t cols) {
  std::vector<double> flat;
  flat.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) {
      throw Error(ErrorCode::kDimension,
                  "ragged matrix row: expected " + std::to_string(cols) +
                      " columns, got " + std::to_string(r.size()));
    }
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return from(rows.size(), cols, std::move(flat));
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimension, "max_abs_diff: shape mismatch " +
                                           a.shape_string() + " vs " +
                                           b.shape_string());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

}  // namespace tracegraph
