// Copyright 2026 The decotune Authors
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

#include "decotune/evaluators.hpp"
#include "decotune/partition.hpp"
#include "decotune/surrogate.hpp"
#include "decotune/tuner.hpp"

namespace {

using namespace decotune;

// Samples from a short tuning run so the data has the shape the tuner sees.
std::vector<Sample> session_samples(std::size_t n, std::size_t dims) {
  SyntheticOptions o;
  o.dims = dims;
  SyntheticEvaluator ev(o);
  TunerParams p;
  p.budget = n;
  p.seed = 1;
  p.max_depth = 0;
  TuningSession s(Subspace::whole(ev.space()), {0.5, 0.5}, ev.baseline(), p);
  cold_start(s, ev);
  tune(s, ev);
  return s.samples();
}

void BM_GpFit(benchmark::State& state) {
  const auto samples = session_samples(static_cast<std::size_t>(state.range(0)), 20);
  for (auto _ : state) {
    GaussianProcess gp;
    gp.fit(samples);
    benchmark::DoNotOptimize(gp.log_marginal_likelihood());
  }
}
BENCHMARK(BM_GpFit)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Decompose(benchmark::State& state) {
  const auto samples = session_samples(static_cast<std::size_t>(state.range(0)), 20);
  DecomposeParams p;
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(decompose(samples, p).training_accuracy);
    } catch (const Unsplittable&) {
    }
  }
}
BENCHMARK(BM_Decompose)->Arg(30)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Propose(benchmark::State& state) {
  const auto samples = session_samples(100, 20);
  GaussianProcess gp;
  gp.fit(samples);
  ProposeOptions o;
  o.pool_size = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(propose(gp, Region{}, samples, ++seed, o).ei);
}
BENCHMARK(BM_Propose)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Descend(benchmark::State& state) {
  const auto samples = session_samples(100, 20);
  TunerParams p;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(descend(samples, p, ++seed).path.size());
}
BENCHMARK(BM_Descend)->Unit(benchmark::kMillisecond);

// One full tuner iteration at 100 samples over 20 knobs.
void BM_Iteration(benchmark::State& state) {
  SyntheticEvaluator ev({});
  TunerParams p;
  p.seed = 3;
  p.budget = 100;
  TuningSession base(Subspace::whole(ev.space()), {0.5, 0.5}, ev.baseline(), p);
  cold_start(base, ev);
  tune(base, ev);
  for (auto _ : state) {
    state.PauseTiming();
    TuningSession s = base;
    s.params().budget = 101;
    state.ResumeTiming();
    tune(s, ev);
    benchmark::DoNotOptimize(s.best_p());
  }
}
BENCHMARK(BM_Iteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
