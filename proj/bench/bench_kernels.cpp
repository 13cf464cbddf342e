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

// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS=N to compare.

#include <random>

#include <benchmark/benchmark.h>

#include "tracegraph/kernels.hpp"

namespace {

using namespace tracegraph;

Tensor2 random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = u(rng);
  return t;
}

template <void (*Fn)(const Tensor2&, const Tensor2&, Tensor2&)>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor2 a = random_tensor(n, n, 1);
  const Tensor2 b = random_tensor(n, n, 2);
  Tensor2 out;
  for (auto _ : state) {
    Fn(a, b, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <void (*Fn)(kernels::UnaryOp, const Tensor2&, Tensor2&)>
void BM_Tanh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor2 x = random_tensor(n, n, 3);
  Tensor2 out;
  for (auto _ : state) {
    Fn(kernels::UnaryOp::kTanh, x, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <void (*Fn)(const Tensor2&, const Tensor2&, const Tensor2&, double, Tensor2&,
                     Tensor2&, std::vector<double>&)>
void BM_LayerNorm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor2 x = random_tensor(n, n, 4);
  const Tensor2 gain(1, n, 1.0);
  const Tensor2 bias(1, n, 0.0);
  Tensor2 out, xhat;
  std::vector<double> inv_std;
  for (auto _ : state) {
    Fn(x, gain, bias, 1e-8, out, xhat, inv_std);
    benchmark::DoNotOptimize(out.data().data());
  }
}

BENCHMARK(BM_Matmul<kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Matmul<kernels::serial::matmul_tn>)->Name("matmul_tn/serial")->Arg(128);
BENCHMARK(BM_Matmul<kernels::parallel::matmul_tn>)->Name("matmul_tn/parallel")->Arg(128);
BENCHMARK(BM_Matmul<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->Arg(128);
BENCHMARK(BM_Matmul<kernels::parallel::matmul_nt>)->Name("matmul_nt/parallel")->Arg(128);
BENCHMARK(BM_Tanh<kernels::serial::unary>)->Name("tanh/serial")->Arg(256);
BENCHMARK(BM_Tanh<kernels::parallel::unary>)->Name("tanh/parallel")->Arg(256);
BENCHMARK(BM_LayerNorm<kernels::serial::layer_norm_rows>)->Name("layer_norm/serial")->Arg(256);
BENCHMARK(BM_LayerNorm<kernels::parallel::layer_norm_rows>)->Name("layer_norm/parallel")->Arg(256);

}  // namespace

BENCHMARK_MAIN();
