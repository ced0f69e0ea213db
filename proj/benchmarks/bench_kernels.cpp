// Copyright 2026 The emgseq Authors
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

#include <benchmark/benchmark.h>

#include "emgseq/nn.hpp"

using namespace emgseq;

namespace {

MatF random_mat(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    MatF m(rows, cols);
    Rng rng(seed);
    for (float& v : m.v) v = static_cast<float>(rng.normal());
    return m;
}

void BM_MatmulNT(benchmark::State& state) {
    const std::int64_t n = state.range(0);
    const MatF a = random_mat(n, n, 1);
    const MatF b = random_mat(n, n, 2);
    MatF c;
    for (auto _ : state) {
        linalg::matmul_nt(a, b, c);
        benchmark::DoNotOptimize(c.v.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatmulNT)->Arg(64)->Arg(256)->Arg(512);

void BM_Conv1dFeaturizerFront(benchmark::State& state) {
    // First featurizer stage over one padded training window.
    const std::int64_t samples = state.range(0);
    const MatF x = random_mat(samples, 32, 3);
    const MatF w = random_mat(128, 32 * 11, 4);
    const MatF b = random_mat(1, 128, 5);
    for (auto _ : state) {
        MatF y = nn::conv1d_causal_fwd(x, w, b, 11, 5, 1);
        benchmark::DoNotOptimize(y.v.data());
    }
    state.SetItemsProcessed(state.iterations() * (samples / 5) * 128 * 32 * 11);
}
BENCHMARK(BM_Conv1dFeaturizerFront)->Arg(2000)->Arg(10000);

void BM_CausalAttention(benchmark::State& state) {
    const std::int64_t frames = state.range(0);
    const std::int64_t d = 256;
    const MatF u = random_mat(frames, d, 6);
    const MatF wq = random_mat(d, d, 7), wk = random_mat(d, d, 8);
    const MatF wv = random_mat(d, d, 9), wo = random_mat(d, d, 10);
    const MatF bias = MatF(1, d);
    for (auto _ : state) {
        MatF y = nn::attention_fwd(u, wq, bias, wk, bias, wv, bias, wo, bias, 16, true, 0.0f,
                                   nullptr, nullptr);
        benchmark::DoNotOptimize(y.v.data());
    }
}
BENCHMARK(BM_CausalAttention)->Arg(100)->Arg(400);

void BM_CumulativeInstanceNorm(benchmark::State& state) {
    const MatF x = random_mat(state.range(0), 128, 11);
    MatF gamma(1, 128), beta(1, 128);
    gamma.fill(1.0f);
    for (auto _ : state) {
        MatF y = nn::cin_fwd(x, gamma, beta, 1e-5f, nullptr);
        benchmark::DoNotOptimize(y.v.data());
    }
}
BENCHMARK(BM_CumulativeInstanceNorm)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
