/* Copyright 2026 The SemiSeg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <benchmark/benchmark.h>

#include "semiseg/fusion.hpp"
#include "semiseg/metrics.hpp"
#include "semiseg/mlmt.hpp"
#include "semiseg/nn.hpp"
#include "semiseg/rng.hpp"
#include "semiseg/s4gan.hpp"
#include "semiseg/synth.hpp"

namespace {

using namespace semiseg;

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(n, c, h, w);
  for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_ConvForward(benchmark::State& state) {
  Rng init(1);
  Conv2d conv("c", 16, 32, 3, 1, 1, init);
  Tensor x = random_tensor(4, 16, 32, 32, 2);
  for (auto _ : state) {
    Tensor y = conv.forward(x, false, nullptr);
    benchmark::DoNotOptimize(y.v.data());
  }
}
BENCHMARK(BM_ConvForward);

void BM_ConvBackward(benchmark::State& state) {
  Rng init(3);
  Conv2d conv("c", 16, 32, 3, 1, 1, init);
  Tensor x = random_tensor(4, 16, 32, 32, 4);
  Tensor y = conv.forward(x, true, nullptr);
  Tensor dy = random_tensor(y.n, y.c, y.h, y.w, 5);
  for (auto _ : state) {
    conv.forward(x, true, nullptr);
    Tensor dx = conv.backward(dy);
    benchmark::DoNotOptimize(dx.v.data());
  }
}
BENCHMARK(BM_ConvBackward);

void BM_SegTrainStep(benchmark::State& state) {
  S4GanConfig cfg;
  cfg.gen.num_classes = 5;
  cfg.gen.width = 8;
  cfg.gen.depth = 2;
  cfg.disc.in_ch = 8;
  cfg.disc.widths = {8, 16, 32, 64};
  HyperParams hp;
  hp.max_iter = 1000000;
  S4ganTrainer trainer(cfg, hp, 7);

  Rng rng(8);
  Tensor xl = random_tensor(2, 3, 32, 32, 9);
  Tensor xu = random_tensor(2, 3, 32, 32, 10);
  std::vector<Mask> masks;
  for (int i = 0; i < 2; ++i) {
    Mask m(32, 32);
    for (auto& v : m.v) v = static_cast<std::uint8_t>(rng.uniform_index(5));
    masks.push_back(m);
  }
  long long iter = 0;
  for (auto _ : state) {
    auto losses = trainer.step(xl, masks, xu, iter++);
    benchmark::DoNotOptimize(losses.total);
  }
}
BENCHMARK(BM_SegTrainStep);

void BM_MlmtTrainStep(benchmark::State& state) {
  MlmtConfig cfg;
  cfg.clf.num_classes = 5;
  cfg.clf.width = 8;
  cfg.clf.depth = 3;
  HyperParams hp;
  hp.max_iter = 1000000;
  MlmtTrainer trainer(cfg, hp, 0.05, 11);

  std::vector<MlmtSample> batch;
  for (int i = 0; i < 4; ++i) {
    MlmtSample s;
    s.view_a = random_tensor(1, 3, 32, 32, 20 + i);
    s.view_b = random_tensor(1, 3, 32, 32, 40 + i);
    if (i % 2 == 0) s.labels = std::vector<std::uint8_t>{1, 0, 1, 0, 0};
    batch.push_back(std::move(s));
  }
  long long iter = 0;
  for (auto _ : state) {
    auto loss = trainer.step(batch, iter++);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(BM_MlmtTrainStep);

void BM_GenerateScene(benchmark::State& state) {
  SceneSpec spec;
  spec.height = 64;
  spec.width = 64;
  long long index = 0;
  for (auto _ : state) {
    SegmentationSample s = generate_scene(spec, index++ % 1000);
    benchmark::DoNotOptimize(s.image.v.data());
  }
}
BENCHMARK(BM_GenerateScene);

void BM_Miou(benchmark::State& state) {
  Rng rng(30);
  Mask gt(128, 128), pred(128, 128);
  for (auto& v : gt.v) v = static_cast<std::uint8_t>(rng.uniform_index(5));
  for (auto& v : pred.v) v = static_cast<std::uint8_t>(rng.uniform_index(5));
  for (auto _ : state) {
    ConfusionMatrix cm(5);
    confusion_update(cm, pred, gt);
    benchmark::DoNotOptimize(miou(cm));
  }
}
BENCHMARK(BM_Miou);

void BM_Fuse(benchmark::State& state) {
  Tensor seg = random_tensor(1, 5, 64, 64, 31);
  for (double& v : seg.v) v = std::abs(v);
  std::vector<double> probs = {0.9, 0.1, 0.8, 0.05, 0.5};
  for (auto _ : state) {
    Tensor fused = fuse(seg, probs, 0.2);
    benchmark::DoNotOptimize(fused.v.data());
  }
}
BENCHMARK(BM_Fuse);

}  // namespace

BENCHMARK_MAIN();
