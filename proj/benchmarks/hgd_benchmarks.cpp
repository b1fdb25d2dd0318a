// Copyright 2026 The HGD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <benchmark/benchmark.h>

#include "hgd/detector.hpp"
#include "hgd/imitation.hpp"
#include "hgd/ops.hpp"
#include "hgd/random.hpp"
#include "hgd/reweighting.hpp"

namespace {

hgd::Tensor random_tensor(hgd::Shape shape, hgd::Rng& rng) {
  hgd::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

// Args: channels, spatial size.
void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  hgd::Rng rng(1);
  const auto x = random_tensor({16, c, s, s}, rng);
  const auto k = random_tensor({c, c, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(hgd::conv2d(x, k, 1, 1));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_Conv2d)->Args({16, 32})->Args({32, 16})->Args({64, 8})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  hgd::Rng rng(2);
  const auto x = random_tensor({16, c, s, s}, rng);
  const auto k = random_tensor({c, c, 3, 3}, rng);
  const auto g = random_tensor({16, c, s, s}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(hgd::conv2d_backward(x, k, g, 1, 1));
}
BENCHMARK(BM_Conv2dBackward)->Args({16, 32})->Args({64, 8})->Unit(benchmark::kMillisecond);

// Arg: 0 teacher, 1 student.
void BM_DetectorForward(benchmark::State& state) {
  hgd::DetectorSpec spec;
  if (state.range(0) == 1) spec = spec.halved();
  const auto det = hgd::Detector::create(spec, 3);
  hgd::Rng rng(3);
  const auto images = random_tensor({16, spec.input_channels, spec.input_size, spec.input_size}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(det.forward(images));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_DetectorForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DetectorBackward(benchmark::State& state) {
  hgd::DetectorSpec spec;
  if (state.range(0) == 1) spec = spec.halved();
  const auto det = hgd::Detector::create(spec, 4);
  hgd::Rng rng(4);
  const auto images = random_tensor({16, spec.input_channels, spec.input_size, spec.input_size}, rng);
  const auto pass = det.forward(images);
  hgd::DetectionOutput<float> grad{random_tensor(pass.outputs.logits.shape(), rng),
                                   random_tensor(pass.outputs.offsets.shape(), rng)};
  for (auto _ : state) benchmark::DoNotOptimize(det.backward(pass, grad));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_DetectorBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Args: metric (0 l2, 1 cosine), weighted.
void BM_Imitation(benchmark::State& state) {
  const auto metric = state.range(0) ? hgd::Metric::kCosine : hgd::Metric::kL2;
  hgd::Rng rng(5);
  std::vector<hgd::MatchedPair> pairs;
  hgd::WeightMaps w;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t hw = std::size_t{32} >> s, c = std::size_t{16} << s;
    hgd::MatchedPair p;
    p.student_adapted = random_tensor({16, c, hw, hw}, rng);
    p.teacher = random_tensor({16, c, hw, hw}, rng);
    p.student_raw = p.student_adapted;
    p.stage = s;
    pairs.push_back(std::move(p));
    w.u.emplace_back(16, 1.0);
    w.v.emplace_back(hgd::Shape{16, 1, hw, hw}, 0.5);
  }
  for (auto _ : state) {
    if (state.range(1)) {
      benchmark::DoNotOptimize(hgd::reweighted_aggregate<float>(pairs, metric, 1e-8, w, true));
    } else {
      benchmark::DoNotOptimize(hgd::aggregate_imitation<float>(pairs, metric, 1e-8, true));
    }
  }
}
BENCHMARK(BM_Imitation)->Args({0, 0})->Args({1, 0})->Args({1, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
