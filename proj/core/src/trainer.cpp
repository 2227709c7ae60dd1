#include "sapda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sapda/errors.hpp"

namespace sapda::train {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSourceBatchStream = 2;
constexpr std::uint64_t kTargetBatchStream = 3;
constexpr Eigen::Index kEvalChunk = 512;

struct ModeTraits {
  bool adversarial = true;
  bool clusterHead = true;
  bool entropyWeighting = true;
  bool sampleWeighting = true;
};

ModeTraits traitsOf(Mode mode) {
  ModeTraits t;
  switch (mode) {
    case Mode::kSapda:
    case Mode::kSapdaHard2:
    case Mode::kSapdaSoft3:
    case Mode::kNoWeightEval:
      break;
    case Mode::kNoClusterHead:
      t.clusterHead = false;
      break;
    case Mode::kUnweightedAdversarial:
      t.clusterHead = false;
      t.entropyWeighting = false;
      t.sampleWeighting = false;
      break;
    case Mode::kSourceOnly:
      t.adversarial = false;
      t.clusterHead = false;
      t.entropyWeighting = false;
      t.sampleWeighting = false;
      break;
  }
  return t;
}

struct IntervalSums {
  double classifier = 0.0;
  double domain = 0.0;
  double cluster = 0.0;
  double total = 0.0;
  std::size_t clamps = 0;
  int steps = 0;
};

weights::SelectionOptions selectionFor(const TrainConfig& config) {
  weights::SelectionOptions options;
  options.tauUniform = config.tauUniform;
  if (config.mode == Mode::kSapdaHard2) options.forcedK = 2;
  if (config.mode == Mode::kSapdaSoft3) options.forcedK = 3;
  return options;
}

// Weight table the mode trains with, given the selection made on W_c.
weights::WeightTable tableFor(Mode mode, const weights::ClassWeightVector& wc, const weights::Selection& s) {
  const ModeTraits traits = traitsOf(mode);
  weights::WeightTable table;
  if (!traits.sampleWeighting) {
    table = weights::WeightTable::uniform(wc.classCount());
  } else if (mode == Mode::kNoWeightEval) {
    table.perClassWeight.assign(wc.values().begin(), wc.values().end());
  } else {
    table = weights::assignWeights(wc, s.kStar, s.partitionFor(s.kStar));
  }
  table.kStar = s.kStar;
  table.chScores = {{2, s.ch2}, {3, s.ch3}};
  return table;
}

}  // namespace

std::string_view modeName(Mode mode) {
  switch (mode) {
    case Mode::kSapda:
      return "sapda";
    case Mode::kSapdaHard2:
      return "sapda-hard2";
    case Mode::kSapdaSoft3:
      return "sapda-soft3";
    case Mode::kUnweightedAdversarial:
      return "unweighted-adversarial";
    case Mode::kSourceOnly:
      return "source-only";
    case Mode::kNoClusterHead:
      return "no-cluster-head";
    case Mode::kNoWeightEval:
      return "no-weight-eval";
  }
  return "?";
}

const std::vector<Mode>& allModes() {
  static const std::vector<Mode> modes = {Mode::kSapda,         Mode::kSapdaHard2,           Mode::kSapdaSoft3,
                                          Mode::kNoWeightEval,  Mode::kNoClusterHead,        Mode::kUnweightedAdversarial,
                                          Mode::kSourceOnly};
  return modes;
}

std::optional<Mode> parseMode(std::string_view name) {
  for (Mode m : allModes()) {
    if (modeName(m) == name) return m;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid train config: " + what); };
  if (updateInterval < 1) fail("interval must be >= 1");
  if (totalIterations < updateInterval) fail("iters must be >= interval");
  if (totalIterations % updateInterval != 0) fail("iters must be a multiple of interval");
  if (batchSize < 1) fail("batch_size must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail("beta must be finite and >= 0");
  if (!(lr.gamma0 > 0.0)) fail("gamma0 must be > 0");
  if (!(lr.eta >= 0.0)) fail("eta must be >= 0");
  if (!(lr.alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(fixedLambda >= 0.0)) fail("lambda must be >= 0");
  if (!(tauUniform >= 0.0)) fail("tau_uniform must be >= 0");
  if (!(entropyLambda >= 0.0)) fail("entropy_lambda must be >= 0");
  if (hiddenWidth < 1 || hiddenLayers < 0 || featureDim < 1) fail("network sizes must be positive");
}

std::vector<int> predict(const nn::NetworkParams& params, const nn::Matrix& inputs) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index start = 0; start < inputs.rows(); start += kEvalChunk) {
    const Eigen::Index rows = std::min(kEvalChunk, inputs.rows() - start);
    const nn::ForwardResult f = nn::forward(params, inputs.middleRows(start, rows), nn::Head::kClassifier);
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index best = 0;
      // maxCoeff returns the first maximum, i.e. the lowest index on ties.
      f.head.logits.row(i).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

double evaluate(const nn::NetworkParams& params, const data::LabeledSet& testSet) {
  if (testSet.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  const std::vector<int> predicted = predict(params, testSet.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == testSet.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(testSet.size());
}

weights::ClassWeightVector classWeightsOver(const nn::NetworkParams& params, const data::UnlabeledSet& set) {
  const Eigen::Index rows = static_cast<Eigen::Index>(set.size());
  nn::Matrix probs(rows, params.architecture().classCount);
  for (Eigen::Index start = 0; start < rows; start += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, rows - start);
    probs.middleRows(start, n) = nn::forward(params, set.inputs.middleRows(start, n), nn::Head::kClassifier).probabilities();
  }
  return weights::computeClassWeights(probs);
}

TrainResult train(const data::PdaTask& task, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  const ModeTraits traits = traitsOf(config.mode);
  const int classCount = task.source.classCount;

  nn::Architecture arch;
  arch.inputDim = static_cast<int>(task.source.inputs.cols());
  arch.hiddenWidth = config.hiddenWidth;
  arch.hiddenLayers = config.hiddenLayers;
  arch.featureDim = config.featureDim;
  arch.classCount = classCount;

  const Rng root(config.seed);
  Rng initRng = root.fork(kInitStream);
  Rng sourceRng = root.fork(kSourceBatchStream);
  Rng targetRng = root.fork(kTargetBatchStream);

  TrainResult result{nn::NetworkParams(arch, initRng), {}, weights::WeightTable::uniform(static_cast<std::size_t>(classCount)), {}, 0.0};
  nn::NetworkParams& params = result.params;
  weights::WeightTable table = weights::WeightTable::uniform(static_cast<std::size_t>(classCount));
  const weights::SelectionOptions selection = selectionFor(config);
  const auto batchSize = static_cast<std::size_t>(config.batchSize);
  const double total = static_cast<double>(config.totalIterations);

  IntervalSums sums;
  for (int it = 1; it <= config.totalIterations; ++it) {
    if (it == 1 && std::any_of(table.perClassWeight.begin(), table.perClassWeight.end(),
                               [](double w) { return w != 1.0; })) {
      throw ContractViolation("train: weights must start at 1 for every class");
    }
    if (hooks.beforeStep) hooks.beforeStep(it, table);

    const double progress = static_cast<double>(it) / total;
    const data::DomainBatch src = data::minibatch(task.source, batchSize, sourceRng, config.balancedSource);
    const std::vector<int>& labels = *src.labels;
    std::optional<data::DomainBatch> tgt;
    if (traits.adversarial || config.targetEntropyMin) tgt = data::minibatch(task.targetTrain, batchSize, targetRng);

    losses::StepPass pass(params, src.inputs, tgt ? &tgt->inputs : nullptr);
    const std::vector<double> w = traits.sampleWeighting ? losses::sampleWeights(table, labels)
                                                         : std::vector<double>(labels.size(), 1.0);
    losses::LossBundle bundle;
    bundle.beta = config.beta;

    losses::ClassifierLossOptions clsOptions;
    clsOptions.entropyWeighting = traits.entropyWeighting;
    const losses::LossValue cls = losses::weightedClassifierLoss(params, pass, labels, w, clsOptions);
    bundle.classifier = cls.value;

    if (traits.adversarial) {
      losses::DomainLossOptions domOptions;
      domOptions.entropyWeighting = traits.entropyWeighting;
      domOptions.reversal = nn::GradientReversal(config.lambdaRamp ? nn::reversalRamp(progress) : config.fixedLambda);
      const losses::LossValue dom = losses::weightedDomainLoss(params, pass, w, domOptions);
      bundle.domain = dom.value;
      bundle.clampCount += dom.clampCount;
    }
    if (traits.clusterHead) {
      const losses::LossValue cl = losses::clusterLoss(params, pass, w, config.beta);
      bundle.cluster = cl.value;
      bundle.clampCount += cl.clampCount;
    }
    if (config.targetEntropyMin) {
      bundle.entropyLambda = config.entropyLambda;
      bundle.targetEntropy = losses::targetEntropyLoss(params, pass, config.entropyLambda).value;
    }
    bundle.total = losses::LossBundle::combine(bundle.classifier, bundle.cluster, bundle.beta, bundle.targetEntropy,
                                               bundle.entropyLambda);
    if (!std::isfinite(bundle.total) || !std::isfinite(bundle.domain)) {
      std::ostringstream msg;
      msg << "train: non-finite loss at iteration " << it << " (L_c=" << bundle.classifier << ", L_d=" << bundle.domain
          << ", L_cl=" << bundle.cluster << ", mode=" << modeName(config.mode) << ", seed=" << config.seed << ")";
      throw DivergenceError(msg.str());
    }

    pass.backward(params);
    try {
      nn::sgdStep(params, config.lr, progress);
    } catch (const DivergenceError& e) {
      throw DivergenceError("train: iteration " + std::to_string(it) + ": " + e.what());
    }

    sums.classifier += bundle.classifier;
    sums.domain += bundle.domain;
    sums.cluster += bundle.cluster;
    sums.total += bundle.total;
    sums.clamps += bundle.clampCount;
    ++sums.steps;

    if (it % config.updateInterval == 0) {
      const weights::ClassWeightVector wc = classWeightsOver(params, task.targetTrain);
      const weights::Selection s = weights::selectK(wc, selection);
      table = tableFor(config.mode, wc, s);

      RunRecordRow row;
      row.iteration = it;
      row.classifierLoss = sums.classifier / sums.steps;
      row.domainLoss = sums.domain / sums.steps;
      row.clusterLoss = sums.cluster / sums.steps;
      row.totalLoss = sums.total / sums.steps;
      row.targetAccuracy = evaluate(params, task.targetTest);
      row.kStar = s.kStar;
      row.ch2 = s.ch2;
      row.ch3 = s.ch3;
      row.classWeights.assign(wc.values().begin(), wc.values().end());
      row.weights = table.perClassWeight;
      row.clampCount = sums.clamps;
      result.history.push_back(std::move(row));
      result.finalClassWeights = wc;
      sums = {};
    }
  }
  result.finalWeights = table;
  result.finalAccuracy = result.history.back().targetAccuracy;
  return result;
}

std::map<Mode, TrainResult> runAblations(const data::PdaTask& task, const TrainConfig& baseConfig,
                                         const std::vector<Mode>& modes) {
  if (modes.empty()) throw ConfigError("runAblations: no modes given");
  std::map<Mode, TrainResult> out;
  for (Mode mode : modes) {
    TrainConfig config = baseConfig;
    config.mode = mode;
    out.emplace(mode, train(task, config));
  }
  return out;
}

}  // namespace sapda::train
