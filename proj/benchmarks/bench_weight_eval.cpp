#include <benchmark/benchmark.h>

#include <vector>

#include "sapda/rng.hpp"
#include "sapda/weight_eval.hpp"

using namespace sapda;

namespace {

weights::ClassWeightVector randomWeights(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform();
  return weights::ClassWeightVector(v);
}

void BM_OptimalPartition(benchmark::State& state) {
  const auto w = randomWeights(static_cast<std::size_t>(state.range(0)), 1);
  const int k = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(weights::optimalPartition(w, k));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_OptimalPartition)->ArgsProduct({{8, 31, 65, 256}, {2, 3}})->Complexity();

void BM_SelectK(benchmark::State& state) {
  const auto w = randomWeights(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(weights::selectK(w));
}
BENCHMARK(BM_SelectK)->Arg(8)->Arg(65)->Arg(256);

}  // namespace
