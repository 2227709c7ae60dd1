#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sapda/data.hpp"
#include "sapda/losses.hpp"
#include "sapda/network.hpp"
#include "sapda/weight_eval.hpp"

namespace sapda::train {

/// Training variants. Besides the full method these cover the ablations:
/// forced two/three-group weighting, plain adversarial adaptation, source-only
/// supervision, no cluster head, and soft W_c weights without grouping.
enum class Mode {
  kSapda,
  kSapdaHard2,
  kSapdaSoft3,
  kUnweightedAdversarial,
  kSourceOnly,
  kNoClusterHead,
  kNoWeightEval,
};

std::string_view modeName(Mode mode);
std::optional<Mode> parseMode(std::string_view name);
const std::vector<Mode>& allModes();

struct TrainConfig {
  int totalIterations = 4000;
  int updateInterval = 250;
  int batchSize = 64;
  double beta = 0.1;
  nn::LrSchedule lr;
  /// Ramp the reversal strength 0 -> 1 over training; otherwise use fixedLambda.
  bool lambdaRamp = true;
  double fixedLambda = 1.0;
  double tauUniform = weights::kDefaultTauUniform;
  Mode mode = Mode::kSapda;
  std::uint64_t seed = 1;
  bool balancedSource = false;
  /// Adds entropyLambda * mean target entropy to the minimized objective.
  bool targetEntropyMin = false;
  double entropyLambda = 0.1;
  int hiddenWidth = 64;
  int hiddenLayers = 2;
  int featureDim = 16;

  /// Throws ConfigError naming the violated constraint.
  void validate() const;
};

/// One row per weight update.
struct RunRecordRow {
  int iteration = 0;
  /// Loss means over the iterations since the previous row.
  double classifierLoss = 0.0;
  double domainLoss = 0.0;
  double clusterLoss = 0.0;
  double totalLoss = 0.0;
  double targetAccuracy = 0.0;
  int kStar = 1;
  double ch2 = 0.0;
  double ch3 = 0.0;
  std::vector<double> classWeights;  // W_c after normalization
  std::vector<double> weights;       // weight table in force after this update
  std::size_t clampCount = 0;
};

struct TrainResult {
  nn::NetworkParams params;
  std::vector<RunRecordRow> history;
  weights::WeightTable finalWeights;
  weights::ClassWeightVector finalClassWeights;
  double finalAccuracy = 0.0;
};

/// Optional observation points, used by tests to watch the loop.
struct TrainHooks {
  /// Called before each optimization step with the weights it will use.
  std::function<void(int iteration, const weights::WeightTable&)> beforeStep;
};

/// Runs the full loop: per iteration a source and a target minibatch, one
/// combined gradient accumulation and one SGD step; every updateInterval
/// iterations W_c is recomputed over the full target training set and the
/// weight table re-evaluated. Throws DivergenceError on a non-finite loss.
TrainResult train(const data::PdaTask& task, const TrainConfig& config, const TrainHooks& hooks = {});

/// Argmax predictions (ties resolve to the lowest class index).
std::vector<int> predict(const nn::NetworkParams& params, const nn::Matrix& inputs);

/// Fraction of correctly classified samples.
double evaluate(const nn::NetworkParams& params, const data::LabeledSet& testSet);

/// W_c over a full unlabeled set, processed in fixed-order chunks.
weights::ClassWeightVector classWeightsOver(const nn::NetworkParams& params, const data::UnlabeledSet& set);

/// Runs every mode on the same task and seed.
std::map<Mode, TrainResult> runAblations(const data::PdaTask& task, const TrainConfig& baseConfig,
                                         const std::vector<Mode>& modes);

}  // namespace sapda::train
