#include <benchmark/benchmark.h>

#include <random>

#include "monostage/crf.hpp"
#include "monostage/potentials.hpp"
#include "monostage/training.hpp"

namespace {

using namespace monostage;

PotentialTable random_table(std::size_t T, std::size_t C) {
  std::mt19937_64 rng(T * 131 + C);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PotentialTable pot{Matrix(T, C), SliceStack(T - 1, C), TransitionMask::monotone(C)};
  for (double& v : pot.unary.values()) v = unit(rng);
  for (double& v : pot.pairwise.values()) v = unit(rng);
  return pot;
}

Matrix random_features(std::size_t T, std::size_t D) {
  std::mt19937_64 rng(T + D);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix f(T, D);
  for (double& v : f.values()) v = normal(rng);
  return f;
}

void args(benchmark::internal::Benchmark* b) {
  for (int T : {50, 325, 1000}) {
    for (int C : {4, 11}) b->Args({T, C});
  }
}

void BM_LogPartition(benchmark::State& state) {
  const auto pot = random_table(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(log_partition(pot));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogPartition)->Apply(args);

void BM_Marginals(benchmark::State& state) {
  const auto pot = random_table(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(marginals(pot));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Marginals)->Apply(args);

void BM_Viterbi(benchmark::State& state) {
  const auto pot = random_table(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(pot));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Viterbi)->Apply(args);

void BM_TotalLoss(benchmark::State& state) {
  const std::size_t T = state.range(0);
  const std::size_t C = state.range(1);
  const auto features = random_features(T, 16);
  const auto model = TwoStreamModel::initialize(C, 16, 1);
  LabelSequence gold(T);
  for (std::size_t t = 0; t < T; ++t) gold[t] = 1 + static_cast<int>(t * C / T);
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(features, gold, model, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TotalLoss)->Apply(args);

}  // namespace

BENCHMARK_MAIN();
