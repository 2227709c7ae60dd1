#include <benchmark/benchmark.h>

#include "sapda/trainer.hpp"

using namespace sapda;

namespace {

// Cost per training iteration, including the amortized weight update.
void BM_TrainIterations(benchmark::State& state) {
  const data::PdaTask task = data::generateTask(data::blobs8to4(1));
  train::TrainConfig config;
  config.totalIterations = 250;
  config.updateInterval = 250;
  config.mode = static_cast<train::Mode>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train::train(task, config).finalAccuracy);
  state.SetItemsProcessed(state.iterations() * config.totalIterations);
  state.SetLabel(std::string(train::modeName(config.mode)));
}
BENCHMARK(BM_TrainIterations)
    ->Arg(static_cast<int>(train::Mode::kSapda))
    ->Arg(static_cast<int>(train::Mode::kSourceOnly))
    ->Unit(benchmark::kMillisecond);

}  // namespace
