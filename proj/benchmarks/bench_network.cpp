#include <benchmark/benchmark.h>

#include "sapda/network.hpp"

using namespace sapda;

namespace {

nn::Matrix randomBatch(Eigen::Index rows, Eigen::Index cols) {
  Rng rng(3);
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_Forward(benchmark::State& state) {
  Rng rng(1);
  const nn::NetworkParams params(nn::Architecture{}, rng);
  const nn::Matrix x = randomBatch(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(params, x, nn::Head::kClassifier));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(512);

void BM_ForwardBackward(benchmark::State& state) {
  Rng rng(1);
  nn::NetworkParams params(nn::Architecture{}, rng);
  const nn::Matrix x = randomBatch(state.range(0), 2);
  const nn::Matrix upstream = randomBatch(state.range(0), 8);
  for (auto _ : state) {
    const nn::ForwardResult r = nn::forward(params, x, nn::Head::kClassifier);
    nn::backward(params, r, upstream);
    params.zeroGradients();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(512);

}  // namespace
