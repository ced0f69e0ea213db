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

// Whole-model forward passes. The large grid points take seconds per pass on
// a laptop; run with --benchmark_filter=tiny when in a hurry.

#include <benchmark/benchmark.h>

#include "emgseq/model.hpp"

using namespace emgseq;

namespace {

MatF random_window(std::int64_t samples, std::uint64_t seed) {
    MatF m(samples, 32);
    Rng rng(seed);
    for (float& v : m.v) v = static_cast<float>(0.5 * rng.normal());
    return m;
}

model::ArchConfig grid_point(int hidden, int layers) {
    model::ArchConfig cfg;
    cfg.hidden_size = hidden;
    cfg.num_layers = layers;
    cfg.set_all_dropouts(0.0f);
    return cfg;
}

void BM_ForwardTiny(benchmark::State& state) {
    const model::Model m = model::Model::build(grid_point(128, 10), 1);
    const MatF window = random_window(state.range(0), 2);
    for (auto _ : state) {
        MatF logits = m.forward(window);
        benchmark::DoNotOptimize(logits.v.data());
    }
}
BENCHMARK(BM_ForwardTiny)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ForwardSmall(benchmark::State& state) {
    const model::Model m = model::Model::build(grid_point(256, 6), 1);
    const MatF window = random_window(state.range(0), 2);
    for (auto _ : state) {
        MatF logits = m.forward(window);
        benchmark::DoNotOptimize(logits.v.data());
    }
}
BENCHMARK(BM_ForwardSmall)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_FeaturizeTiny(benchmark::State& state) {
    const model::Model m = model::Model::build(grid_point(128, 10), 1);
    const MatF window = random_window(10000, 2);
    for (auto _ : state) {
        MatF feat = m.featurize(window);
        benchmark::DoNotOptimize(feat.v.data());
    }
}
BENCHMARK(BM_FeaturizeTiny)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
