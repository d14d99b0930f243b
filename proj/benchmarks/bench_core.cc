// benchmarks/bench_core.cc

// Copyright 2026  The ufem authors

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

#include "ufem/backbone.hpp"
#include "ufem/data.hpp"
#include "ufem/dcp.hpp"
#include "ufem/nets.hpp"
#include "ufem/synth.hpp"

namespace {

using namespace ufem;

Tensor random_feature(int n, int c, int hw, uint64_t seed) {
  Rng rng(seed);
  Tensor t(n, c, hw, hw);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

void BM_GramMatrix(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  const Tensor f = random_feature(1, c, hw, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram_of_sample(f, 0, GramNormalization::kRaw));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GramMatrix)->Args({16, 16})->Args({64, 8})->Args({128, 4});

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  Rng rng(2);
  Conv2d conv(c, c, 3, 1, 1, PadMode::kReplicate);
  init_normal(conv.weight(), 0.05, rng);
  const Tensor x = random_feature(5, c, hw, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv.infer(x));
  }
}
BENCHMARK(BM_Conv2dForward)->Args({16, 16})->Args({32, 16})->Args({64, 8});

void BM_GeneratorForward(benchmark::State& state) {
  GeneratorSpec spec;
  spec.in_channels = 16;
  spec.base_width = static_cast<int>(state.range(0));
  spec.residual_blocks = 2;
  spec.init = GeneratorInit::kStandard;
  auto g = build_generator(spec, 4);
  const Tensor f = random_feature(5, 16, 16, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(g->infer(f));
  }
}
BENCHMARK(BM_GeneratorForward)->Arg(32)->Arg(64);

void BM_GeneratorTrainStep(benchmark::State& state) {
  GeneratorSpec spec;
  spec.in_channels = 16;
  spec.base_width = 32;
  spec.residual_blocks = 2;
  spec.init = GeneratorInit::kStandard;
  auto g = build_generator(spec, 6);
  Adam opt(g->params(), 2e-4);
  const Tensor f = random_feature(5, 16, 16, 7);
  for (auto _ : state) {
    opt.zero_grad();
    Tensor y = g->forward(f);
    g->backward(y);
    opt.step();
  }
}
BENCHMARK(BM_GeneratorTrainStep);

void BM_TinyVggForward(benchmark::State& state) {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  Rng rng(8);
  Tensor images(static_cast<int>(state.range(0)), 3, 32, 32);
  for (int64_t i = 0; i < images.size(); ++i) images.data()[i] = rng.uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(backbone->forward_images(images));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TinyVggForward)->Arg(1)->Arg(32);

void BM_FogDegradation(benchmark::State& state) {
  const Tensor img = render_synth_image(3, 9, 32);
  const DegradationSpec spec{DegradationKind::kFog, 3, 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_fog(img, spec));
  }
}
BENCHMARK(BM_FogDegradation);

void BM_MotionBlurDegradation(benchmark::State& state) {
  const Tensor img = render_synth_image(3, 9, 32);
  const int severity = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_motion_blur_angle(img, severity, 0.7));
  }
}
BENCHMARK(BM_MotionBlurDegradation)->Arg(1)->Arg(3)->Arg(5);

void BM_SilhouetteScore(benchmark::State& state) {
  Rng rng(10);
  std::vector<std::vector<double>> pts;
  std::vector<int> labels;
  for (int i = 0; i < 300; ++i) {
    pts.push_back({rng.normal(i % 3 * 5.0, 1.0), rng.normal(0.0, 1.0)});
    labels.push_back(i % 3);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(separability_score(pts, labels));
  }
}
BENCHMARK(BM_SilhouetteScore);

}  // namespace

BENCHMARK_MAIN();
