// Copyright 2026 The Realness Loop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parallel kernels against their serial references.

#include <random>
#include <vector>

#include "benchmark/benchmark.h"
#include "rloop/kernels.hpp"

namespace {

std::vector<float> Random(size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = dist(rng);
  return v;
}

template <bool kReference>
void BM_Gemm(benchmark::State& state) {
  const int64_t n = state.range(0);
  auto a = Random(n * n), b = Random(n * n);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (kReference) {
      rloop::kernels::reference::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    } else {
      rloop::kernels::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["FLOPS"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(256);

template <bool kReference>
void BM_Attention(benchmark::State& state) {
  rloop::kernels::AttentionDims d{8, 64, 64, 4, 32};
  const size_t n = d.batch * d.q_len * d.model_dim();
  auto q = Random(n), k = Random(n), v = Random(n);
  std::vector<float> out(n), probs(d.batch * d.heads * d.q_len * d.kv_len);
  for (auto _ : state) {
    if constexpr (kReference) {
      rloop::kernels::reference::attention_forward(d, q.data(), k.data(), v.data(), out.data(),
                                                   probs.data());
    } else {
      rloop::kernels::attention_forward(d, q.data(), k.data(), v.data(), out.data(), probs.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Attention<false>);
BENCHMARK(BM_Attention<true>);

template <bool kReference>
void BM_Blur(benchmark::State& state) {
  const std::vector<double> kernel(29, 1.0 / 29);
  auto x = Random(3 * 256 * 256);
  std::vector<float> y(x.size());
  for (auto _ : state) {
    if constexpr (kReference) {
      rloop::kernels::reference::gaussian_blur(3, 256, 256, x.data(), kernel, y.data());
    } else {
      rloop::kernels::gaussian_blur(3, 256, 256, x.data(), kernel, y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Blur<false>);
BENCHMARK(BM_Blur<true>);

template <bool kReference>
void BM_Depthwise(benchmark::State& state) {
  const int64_t b = 8, h = 32, w = 32, c = 64;
  auto x = Random(b * h * w * c), wt = Random(9 * c), bias = Random(c);
  std::vector<float> y(x.size());
  for (auto _ : state) {
    if constexpr (kReference) {
      rloop::kernels::reference::depthwise_conv3x3_forward(b, h, w, c, x.data(), wt.data(),
                                                           bias.data(), y.data());
    } else {
      rloop::kernels::depthwise_conv3x3_forward(b, h, w, c, x.data(), wt.data(), bias.data(),
                                                y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Depthwise<false>);
BENCHMARK(BM_Depthwise<true>);

}  // namespace

BENCHMARK_MAIN();
