#include "sapda/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "sapda/errors.hpp"

namespace sapda::losses {

namespace {

using nn::Head;
using nn::Matrix;

std::size_t headSlot(Head head) { return static_cast<std::size_t>(head); }

double rowEntropy(const Matrix& probs, Eigen::Index row) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    const double p = probs(row, j);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

// log-sum-exp of a logit row, for a stable log-softmax.
double logSumExp(const Matrix& logits, Eigen::Index row) {
  const double peak = logits.row(row).maxCoeff();
  return peak + std::log((logits.row(row).array() - peak).exp().sum());
}

struct Clamped {
  double value;
  bool clamped;
};

Clamped clampProbability(double p) {
  if (p < kProbabilityClamp) return {kProbabilityClamp, true};
  if (p > 1.0 - kProbabilityClamp) return {1.0 - kProbabilityClamp, true};
  return {p, false};
}

void requireSize(std::span<const double> values, Eigen::Index rows, const char* what) {
  if (static_cast<Eigen::Index>(values.size()) != rows) {
    throw std::invalid_argument(std::string(what) + ": one value per source sample required");
  }
}

}  // namespace

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double entropyWeight(std::span<const double> probs) { return 1.0 + std::exp(-entropy(probs)); }

std::vector<double> sampleWeights(const weights::WeightTable& table, std::span<const int> labels) {
  std::vector<double> out;
  out.reserve(labels.size());
  for (int y : labels) out.push_back(table.weightFor(y));
  return out;
}

StepPass::StepPass(const nn::NetworkParams& params, const Matrix& source, const Matrix* target)
    : params_(&params), source_(nn::forwardFeatures(params, source)) {
  sourceGrad_ = Matrix::Zero(source_.features().rows(), source_.features().cols());
  if (target != nullptr) {
    target_ = nn::forwardFeatures(params, *target);
    targetGrad_ = Matrix::Zero(target_->features().rows(), target_->features().cols());
  }
}

const nn::HeadTape& StepPass::sourceHead(Head head) {
  auto& slot = sourceHeads_[headSlot(head)];
  if (!slot) slot = nn::forwardHead(*params_, head, source_.features());
  return *slot;
}

const nn::HeadTape& StepPass::targetHead(Head head) {
  if (!target_) throw ContractViolation("StepPass: no target batch in this pass");
  auto& slot = targetHeads_[headSlot(head)];
  if (!slot) slot = nn::forwardHead(*params_, head, target_->features());
  return *slot;
}

void StepPass::backward(nn::NetworkParams& params) {
  nn::backwardFeatures(params, source_, sourceGrad_);
  if (target_) nn::backwardFeatures(params, *target_, targetGrad_);
}

LossValue weightedClassifierLoss(nn::NetworkParams& params, StepPass& pass, std::span<const int> labels,
                                 std::span<const double> sampleWeights, const ClassifierLossOptions& options) {
  const nn::HeadTape& tape = pass.sourceHead(Head::kClassifier);
  const Eigen::Index n = tape.logits.rows();
  const Eigen::Index classes = tape.logits.cols();
  requireSize(sampleWeights, n, "weightedClassifierLoss");
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw std::invalid_argument("weightedClassifierLoss: one label per source sample required");
  }

  Matrix logitGrad = Matrix::Zero(n, classes);
  double loss = 0.0;
  const double invN = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) throw std::invalid_argument("weightedClassifierLoss: label out of range");
    const double w = sampleWeights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    const double m = options.entropyWeighting ? 1.0 + std::exp(-rowEntropy(tape.probabilities, i)) : 1.0;
    const double coeff = w * m * invN;
    loss += coeff * (logSumExp(tape.logits, i) - tape.logits(i, y));
    logitGrad.row(i) = coeff * options.gradScale * tape.probabilities.row(i);
    logitGrad(i, y) -= coeff * options.gradScale;
  }
  pass.addSourceFeatureGrad(nn::backwardHead(params, tape, logitGrad));
  return {loss, 0};
}

LossValue weightedDomainLoss(nn::NetworkParams& params, StepPass& pass, std::span<const double> sampleWeights,
                             const DomainLossOptions& options) {
  const nn::HeadTape& src = pass.sourceHead(Head::kDomain);
  const Eigen::Index ns = src.logits.rows();
  requireSize(sampleWeights, ns, "weightedDomainLoss");
  if (!pass.hasTarget()) throw std::invalid_argument("weightedDomainLoss: target batch required");

  std::optional<Matrix> classProbs;
  if (options.entropyWeighting) classProbs = pass.sourceHead(Head::kClassifier).probabilities;
  const nn::HeadTape& tgt = pass.targetHead(Head::kDomain);
  const Eigen::Index nt = tgt.logits.rows();

  LossValue out;
  // Gradients below are of -L_d with respect to the discriminator logit.
  Matrix srcGrad = Matrix::Zero(ns, 1);
  const double invS = 1.0 / static_cast<double>(ns);
  for (Eigen::Index i = 0; i < ns; ++i) {
    const double w = sampleWeights[static_cast<std::size_t>(i)];
    const double m = classProbs ? 1.0 + std::exp(-rowEntropy(*classProbs, i)) : 1.0;
    const double coeff = w * m * invS;
    const auto [p, clamped] = clampProbability(src.probabilities(i, 0));
    if (clamped) ++out.clampCount;
    if (coeff == 0.0) continue;
    out.value += coeff * std::log(p);
    if (!clamped) srcGrad(i, 0) = -coeff * (1.0 - p);
  }
  Matrix tgtGrad = Matrix::Zero(nt, 1);
  const double invT = 1.0 / static_cast<double>(nt);
  for (Eigen::Index i = 0; i < nt; ++i) {
    const auto [p, clamped] = clampProbability(tgt.probabilities(i, 0));
    if (clamped) ++out.clampCount;
    out.value += invT * std::log(1.0 - p);
    if (!clamped) tgtGrad(i, 0) = invT * p;
  }

  Matrix srcFeat = nn::backwardHead(params, src, srcGrad);
  Matrix tgtFeat = nn::backwardHead(params, tgt, tgtGrad);
  if (options.reversal) {
    srcFeat = options.reversal->backward(srcFeat);
    tgtFeat = options.reversal->backward(tgtFeat);
  }
  pass.addSourceFeatureGrad(srcFeat);
  pass.addTargetFeatureGrad(tgtFeat);
  return out;
}

LossValue clusterLoss(nn::NetworkParams& params, StepPass& pass, std::span<const double> sourceTargets,
                      double gradScale) {
  const nn::HeadTape& src = pass.sourceHead(Head::kCluster);
  const Eigen::Index ns = src.logits.rows();
  requireSize(sourceTargets, ns, "clusterLoss");
  if (!pass.hasTarget()) throw std::invalid_argument("clusterLoss: target batch required");
  const nn::HeadTape& tgt = pass.targetHead(Head::kCluster);
  const Eigen::Index nt = tgt.logits.rows();

  LossValue out;
  auto bce = [&](const nn::HeadTape& tape, Eigen::Index i, double t, double scale, Matrix& grad) {
    const auto [p, clamped] = clampProbability(tape.probabilities(i, 0));
    if (clamped) ++out.clampCount;
    double term = 0.0;
    if (t > 0.0) term -= t * std::log(p);
    if (t < 1.0) term -= (1.0 - t) * std::log(1.0 - p);
    out.value += scale * term;
    if (!clamped) grad(i, 0) = gradScale * scale * (p - t);
  };

  Matrix srcGrad = Matrix::Zero(ns, 1);
  for (Eigen::Index i = 0; i < ns; ++i) {
    bce(src, i, sourceTargets[static_cast<std::size_t>(i)], 1.0 / static_cast<double>(ns), srcGrad);
  }
  Matrix tgtGrad = Matrix::Zero(nt, 1);
  for (Eigen::Index i = 0; i < nt; ++i) bce(tgt, i, 1.0, 1.0 / static_cast<double>(nt), tgtGrad);

  pass.addSourceFeatureGrad(nn::backwardHead(params, src, srcGrad));
  pass.addTargetFeatureGrad(nn::backwardHead(params, tgt, tgtGrad));
  return out;
}

LossValue targetEntropyLoss(nn::NetworkParams& params, StepPass& pass, double gradScale) {
  const nn::HeadTape& tape = pass.targetHead(Head::kClassifier);
  const Eigen::Index n = tape.logits.rows();
  const Eigen::Index classes = tape.logits.cols();
  const double invN = 1.0 / static_cast<double>(n);
  Matrix logitGrad(n, classes);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lse = logSumExp(tape.logits, i);
    double h = 0.0;
    for (Eigen::Index j = 0; j < classes; ++j) h -= tape.probabilities(i, j) * (tape.logits(i, j) - lse);
    loss += invN * h;
    // dH/dz_j = -p_j (log p_j + H)
    for (Eigen::Index j = 0; j < classes; ++j) {
      logitGrad(i, j) = -gradScale * invN * tape.probabilities(i, j) * ((tape.logits(i, j) - lse) + h);
    }
  }
  pass.addTargetFeatureGrad(nn::backwardHead(params, tape, logitGrad));
  return {loss, 0};
}

LossValue weightedClassifierLoss(nn::NetworkParams& params, const Matrix& source, std::span<const int> labels,
                                 const weights::WeightTable& table, const ClassifierLossOptions& options) {
  StepPass pass(params, source);
  const auto w = sampleWeights(table, labels);
  const LossValue out = weightedClassifierLoss(params, pass, labels, w, options);
  pass.backward(params);
  return out;
}

LossValue weightedDomainLoss(nn::NetworkParams& params, const Matrix& source, std::span<const int> labels,
                             const Matrix& target, const weights::WeightTable& table, double lambda) {
  StepPass pass(params, source, &target);
  const auto w = sampleWeights(table, labels);
  DomainLossOptions options;
  options.reversal = nn::GradientReversal(lambda);
  const LossValue out = weightedDomainLoss(params, pass, w, options);
  pass.backward(params);
  return out;
}

LossValue clusterLoss(nn::NetworkParams& params, const Matrix& source, std::span<const int> labels,
                      const Matrix& target, const weights::WeightTable& table) {
  StepPass pass(params, source, &target);
  const auto w = sampleWeights(table, labels);
  const LossValue out = clusterLoss(params, pass, w);
  pass.backward(params);
  return out;
}

}  // namespace sapda::losses
