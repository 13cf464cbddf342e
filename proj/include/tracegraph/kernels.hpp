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

// Dense kernels used by the autodiff tape. Every kernel exists twice: a
// serial reference and an OpenMP version that partitions output rows across
// threads. Both accumulate each output entry in the same order (k ascending,
// left to right), so their results are bitwise identical; the tests and the
// benchmark target rely on that.

#include <cstddef>

#include "tracegraph/tensor.hpp"

namespace tracegraph::kernels {

enum class UnaryOp { kSigmoid, kTanh, kRelu };

namespace serial {
/// out = a * b
void matmul(const Tensor2& a, const Tensor2& b, Tensor2& out);
/// out = a^T * b
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out);
/// out = a * b^T
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out);
void unary(UnaryOp op, const Tensor2& x, Tensor2& out);
void layer_norm_rows(const Tensor2& x, const Tensor2& gain, const Tensor2& bias,
                     double var_floor, Tensor2& out, Tensor2& xhat,
                     std::vector<double>& inv_std);
}  // namespace serial

namespace parallel {
void matmul(const Tensor2& a, const Tensor2& b, Tensor2& out);
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out);
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out);
void unary(UnaryOp op, const Tensor2& x, Tensor2& out);
void layer_norm_rows(const Tensor2& x, const Tensor2& gain, const Tensor2& bias,
                     double var_floor, Tensor2& out, Tensor2& xhat,
                     std::vector<double>& inv_std);
}  // namespace parallel

/// Multiply-add count below which the dispatchers stay serial.
inline constexpr std::size_t kParallelThreshold = 1 << 16;

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
Tensor2 unary(UnaryOp op, const Tensor2& x);

double sigmoid(double x);

}  // namespace tracegraph::kernels
