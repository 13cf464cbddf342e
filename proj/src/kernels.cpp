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

#include "tracegraph/kernels.hpp"

#include <cmath>
#include <cstdint>

#include "tracegraph/error.hpp"

namespace tracegraph::kernels {

namespace {

void check_matmul(const char* op, std::size_t a_inner, std::size_t b_inner,
                  const Tensor2& a, const Tensor2& b) {
  if (a_inner != b_inner) {
    throw Error(ErrorCode::kDimension, std::string(op) + ": shape mismatch " +
                                           a.shape_string() + " and " +
                                           b.shape_string());
  }
}

// Row kernels shared by both backends. Each computes one output row and owns
// the accumulation order.
inline void matmul_row(const Tensor2& a, const Tensor2& b, std::size_t i,
                       double* out_row) {
  const std::size_t n = b.cols();
  for (std::size_t j = 0; j < n; ++j) out_row[j] = 0.0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(i, k);
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * brow[j];
  }
}

inline void matmul_tn_row(const Tensor2& a, const Tensor2& b, std::size_t i,
                          double* out_row) {
  // out(i, j) = sum_k a(k, i) * b(k, j)
  const std::size_t n = b.cols();
  for (std::size_t j = 0; j < n; ++j) out_row[j] = 0.0;
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double aki = a(k, i);
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < n; ++j) out_row[j] += aki * brow[j];
  }
}

inline void matmul_nt_row(const Tensor2& a, const Tensor2& b, std::size_t i,
                          double* out_row) {
  // out(i, j) = sum_k a(i, k) * b(j, k)
  const double* arow = a.row(i).data();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.row(j).data();
    double acc = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
    out_row[j] = acc;
  }
}

inline double apply_unary(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::kSigmoid: return sigmoid(x);
    case UnaryOp::kTanh: return std::tanh(x);
    case UnaryOp::kRelu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

inline void layer_norm_row(const Tensor2& x, const Tensor2& gain,
                           const Tensor2& bias, double var_floor,
                           std::size_t r, Tensor2& out, Tensor2& xhat,
                           std::vector<double>& inv_std) {
  const std::size_t n = x.cols();
  if (n == 0) {
    inv_std[r] = 0.0;
    return;
  }
  double mean = 0.0;
  for (std::size_t c = 0; c < n; ++c) mean += x(r, c);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double d = x(r, c) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double is = 1.0 / std::sqrt(var > var_floor ? var : var_floor);
  inv_std[r] = is;
  for (std::size_t c = 0; c < n; ++c) {
    const double h = (x(r, c) - mean) * is;
    xhat(r, c) = h;
    out(r, c) = h * gain(0, c) + bias(0, c);
  }
}

void check_layer_norm(const Tensor2& x, const Tensor2& gain,
                      const Tensor2& bias) {
  if (gain.rows() != 1 || bias.rows() != 1 || gain.cols() != x.cols() ||
      bias.cols() != x.cols()) {
    throw Error(ErrorCode::kDimension,
                "layer_norm_row: gain/bias " + gain.shape_string() + "/" +
                    bias.shape_string() + " incompatible with input " +
                    x.shape_string());
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace serial {

void matmul(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  check_matmul("matmul", a.cols(), b.rows(), a, b);
  out = Tensor2(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, i, out.row(i).data());
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  check_matmul("matmul_tn", a.rows(), b.rows(), a, b);
  out = Tensor2(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) matmul_tn_row(a, b, i, out.row(i).data());
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  check_matmul("matmul_nt", a.cols(), b.cols(), a, b);
  out = Tensor2(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_nt_row(a, b, i, out.row(i).data());
}

void unary(UnaryOp op, const Tensor2& x, Tensor2& out) {
  out = Tensor2(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.data()[i] = apply_unary(op, x.data()[i]);
  }
}

void layer_norm_rows(const Tensor2& x, const Tensor2& gain, const Tensor2& bias,
                     double var_floor, Tensor2& out, Tensor2& xhat,
                     std::vector<double>& inv_std) {
  check_layer_norm(x, gain, bias);
  out = Tensor2(x.rows(), x.cols());
  xhat = Tensor2(x.rows(), x.cols());
  inv_std.assign(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    layer_norm_row(x, gain, bias, var_floor, r, out, xhat, inv_std);
  }
}

}  // namespace serial

namespace parallel {

void matmul(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  check_matmul("matmul", a.cols(), b.rows(), a, b);
  out = Tensor2(a.rows(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    matmul_row(a, b, static_cast<std::size_t>(i), out.row(i).data());
  }
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  check_matmul("matmul_tn", a.rows(), b.rows(), a, b);
  out = Tensor2(a.cols(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    matmul_tn_row(a, b, static_cast<std::size_t>(i), out.row(i).data());
  }
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  check_matmul("matmul_nt", a.cols(), b.cols(), a, b);
  out = Tensor2(a.rows(), b.rows());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    matmul_nt_row(a, b, static_cast<std::size_t>(i), out.row(i).data());
  }
}

void unary(UnaryOp op, const Tensor2& x, Tensor2& out) {
  out = Tensor2(x.rows(), x.cols());
  const auto n = static_cast<std::int64_t>(x.size());
  const double* in = x.data().data();
  double* dst = out.data().data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) dst[i] = apply_unary(op, in[i]);
}

void layer_norm_rows(const Tensor2& x, const Tensor2& gain, const Tensor2& bias,
                     double var_floor, Tensor2& out, Tensor2& xhat,
                     std::vector<double>& inv_std) {
  check_layer_norm(x, gain, bias);
  out = Tensor2(x.rows(), x.cols());
  xhat = Tensor2(x.rows(), x.cols());
  inv_std.assign(x.rows(), 0.0);
  const auto rows = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    layer_norm_row(x, gain, bias, var_floor, static_cast<std::size_t>(r), out,
                   xhat, inv_std);
  }
}

}  // namespace parallel

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 out;
  if (a.rows() * a.cols() * b.cols() >= kParallelThreshold) {
    parallel::matmul(a, b, out);
  } else {
    serial::matmul(a, b, out);
  }
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  Tensor2 out;
  if (a.rows() * a.cols() * b.cols() >= kParallelThreshold) {
    parallel::matmul_tn(a, b, out);
  } else {
    serial::matmul_tn(a, b, out);
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  Tensor2 out;
  if (a.rows() * a.cols() * b.rows() >= kParallelThreshold) {
    parallel::matmul_nt(a, b, out);
  } else {
    serial::matmul_nt(a, b, out);
  }
  return out;
}

Tensor2 unary(UnaryOp op, const Tensor2& x) {
  Tensor2 out;
  if (x.size() >= kParallelThreshold) {
    parallel::unary(op, x, out);
  } else {
    serial::unary(op, x, out);
  }
  return out;
}

}  // namespace tracegraph::kernels
