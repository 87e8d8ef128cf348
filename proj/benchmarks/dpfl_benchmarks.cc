//
// Copyright 2026 The dpfl-lab Authors
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
//


// Microbenchmarks on the default fixture shapes (32 inputs, 10 classes,
// one hidden layer of 64).

#include <benchmark/benchmark.h>

#include <limits>
#include <vector>

#include "dpfl/analysis.h"
#include "dpfl/attacks.h"
#include "dpfl/config.h"
#include "dpfl/data.h"
#include "dpfl/experiment.h"
#include "dpfl/federation.h"
#include "dpfl/models.h"
#include "dpfl/privacy.h"

namespace dpfl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const PreparedData& Data() {
  static const PreparedData data = PrepareData(ParseConfig("{}"));
  return data;
}

LabeledDataset Batch(Index n) {
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i) rows.push_back(i);
  return Data().pair.target.Subset(rows);
}

void BM_ClippedSum(benchmark::State& state) {
  const auto& d = Data();
  const LabeledDataset batch = Batch(state.range(0));
  const ParameterVector theta = InitParams(d.spec, 1, 1.0);
  const double clip = state.range(1) ? 1.0 : kInf;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeClippedSum(d.spec, theta, batch.features(), batch.labels(),
                                               clip, GradientScope::kFull));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClippedSum)->Args({800, 1})->Args({800, 0})->Args({8000, 1});

void BM_PerSampleGradients(benchmark::State& state) {
  const auto& d = Data();
  const LabeledDataset batch = Batch(state.range(0));
  const ParameterVector theta = InitParams(d.spec, 1, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ComputePerSampleGradients(d.spec, theta, batch.features(), batch.labels()));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PerSampleGradients)->Arg(200)->Arg(800);

void BM_Privatize(benchmark::State& state) {
  const auto& d = Data();
  const LabeledDataset batch = Batch(state.range(0));
  const PerSampleGradients g = ComputePerSampleGradients(
      d.spec, InitParams(d.spec, 1, 1.0), batch.features(), batch.labels());
  PrivacySpec spec;
  spec.epsilon = 1.0;
  spec.clip_norm = 1.0;
  int round = 0;
  for (auto _ : state) {
    NoiseStream stream(0, 0, round++);
    benchmark::DoNotOptimize(Privatize(g, spec, stream));
  }
}
BENCHMARK(BM_Privatize)->Arg(800);

void BM_DirichletPartition(benchmark::State& state) {
  const auto& target = Data().pair.target;
  const double alpha = static_cast<double>(state.range(0)) / 10.0;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(DirichletPartition(target, 10, alpha, seed++));
  }
}
BENCHMARK(BM_DirichletPartition)->Arg(1)->Arg(10);

void BM_MiaRound(benchmark::State& state) {
  const auto& d = Data();
  const ParameterVector theta = InitParams(d.spec, 1, 1.0);
  PrivacySpec spec;
  spec.epsilon = 1.0;
  spec.clip_norm = 1.0;
  std::vector<GradientReport> reports;
  for (std::size_t n = 0; n < d.partition.assignments.size(); ++n) {
    const LabeledDataset local = d.pair.target.Subset(d.partition.assignments[n]);
    const ClippedSum s = ComputeClippedSum(d.spec, theta, local.features(), local.labels(),
                                           spec.clip_norm, GradientScope::kFull);
    NoiseStream stream(0, static_cast<int>(n), 1);
    reports.push_back({static_cast<int>(n), 1, PrivatizeSum(s.sum, s.count, spec.sigma(), stream),
                       static_cast<double>(local.size()) / d.pair.target.size(), std::nullopt});
  }
  const AttackSplit split = BuildAttackSplit(d.partition, 50, d.test, 500, 0);
  const ExposedRound round{1, &theta, 0.6, &reports};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        MiaAttackRound(round, split, d.spec, Strategy::kST, d.pair.target, d.test));
  }
}
BENCHMARK(BM_MiaRound)->Unit(benchmark::kMillisecond);

void BM_LdaProject(benchmark::State& state) {
  const auto& d = Data();
  const std::vector<LabeledDataset> sets = {d.pair.source, d.pair.target};
  for (auto _ : state) benchmark::DoNotOptimize(LdaProject(sets));
}
BENCHMARK(BM_LdaProject)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dpfl

int main(int argc, char** argv) {
  dpfl::ConfigureAllocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
