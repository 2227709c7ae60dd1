#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sapda/network.hpp"
#include "sapda/weight_eval.hpp"

namespace sapda::losses {

/// Discriminator and cluster-head probabilities are clamped to
/// [kProbabilityClamp, 1 - kProbabilityClamp] before taking logs. Clamped
/// samples contribute no gradient and are counted in LossValue::clampCount.
inline constexpr double kProbabilityClamp = 1e-7;

/// Shannon entropy (natural log) of a probability row, with 0 log 0 = 0.
double entropy(std::span<const double> probs);

/// Confidence factor m = 1 + exp(-H) in (1, 2].
double entropyWeight(std::span<const double> probs);

/// Looks up w for each source sample by its class label.
std::vector<double> sampleWeights(const weights::WeightTable& table, std::span<const int> labels);

struct LossValue {
  double value = 0.0;
  std::size_t clampCount = 0;
};

/// Per-step loss components. `total` is what the classifier and cluster
/// heads minimize jointly; the domain term enters through gradient reversal.
struct LossBundle {
  double classifier = 0.0;
  double domain = 0.0;
  double cluster = 0.0;
  double targetEntropy = 0.0;
  double beta = 0.1;
  double entropyLambda = 0.0;
  double total = 0.0;
  std::size_t clampCount = 0;

  static double combine(double classifier, double cluster, double beta, double targetEntropy,
                        double entropyLambda) {
    return classifier + beta * cluster + entropyLambda * targetEntropy;
  }
};

/// One forward pass of the feature extractor over a source batch and an
/// optional target batch. Head outputs are computed on demand and cached;
/// feature gradients from every loss accumulate here until backward().
class StepPass {
 public:
  StepPass(const nn::NetworkParams& params, const nn::Matrix& source, const nn::Matrix* target = nullptr);

  bool hasTarget() const { return target_.has_value(); }
  Eigen::Index sourceRows() const { return source_.features().rows(); }
  Eigen::Index targetRows() const { return target_ ? target_->features().rows() : 0; }

  const nn::HeadTape& sourceHead(nn::Head head);
  const nn::HeadTape& targetHead(nn::Head head);

  void addSourceFeatureGrad(const nn::Matrix& grad) { sourceGrad_ += grad; }
  void addTargetFeatureGrad(const nn::Matrix& grad) { targetGrad_ += grad; }

  /// Pushes the accumulated feature gradients into the feature extractor.
  void backward(nn::NetworkParams& params);

 private:
  const nn::NetworkParams* params_;
  nn::FeatureTape source_;
  std::optional<nn::FeatureTape> target_;
  std::array<std::optional<nn::HeadTape>, 3> sourceHeads_;
  std::array<std::optional<nn::HeadTape>, 3> targetHeads_;
  nn::Matrix sourceGrad_;
  nn::Matrix targetGrad_;
};

struct ClassifierLossOptions {
  /// Multiply each sample by its entropy weight m (stop-gradient). Off gives
  /// plain weighted cross-entropy.
  bool entropyWeighting = true;
  /// Multiplier applied to every gradient this loss produces.
  double gradScale = 1.0;
};

/// (1/n_s) sum_i w_i m_i CE(p_i, y_i). Accumulates gradients into the
/// classifier head and into the pass's source feature gradient.
LossValue weightedClassifierLoss(nn::NetworkParams& params, StepPass& pass, std::span<const int> labels,
                                 std::span<const double> sampleWeights, const ClassifierLossOptions& options = {});

struct DomainLossOptions {
  bool entropyWeighting = true;
  /// Reversal applied to the feature gradient; nullopt passes it through
  /// unchanged (used to verify the reversal).
  std::optional<nn::GradientReversal> reversal = nn::GradientReversal(1.0);
};

/// L_d = mean_s[w m log D(f)] + mean_t[log(1 - D(f))]. The returned value is
/// L_d itself. The discriminator receives the gradient of -L_d (so a descent
/// step ascends L_d); the feature gradient is that same quantity sent through
/// the reversal.
LossValue weightedDomainLoss(nn::NetworkParams& params, StepPass& pass, std::span<const double> sampleWeights,
                             const DomainLossOptions& options = {});

/// Binary cross-entropy of the cluster head against soft targets: t = w_i for
/// source samples, t = 1 for target samples; source mean plus target mean.
/// `gradScale` multiplies gradients into both the head and the features.
LossValue clusterLoss(nn::NetworkParams& params, StepPass& pass, std::span<const double> sourceTargets,
                      double gradScale = 1.0);

/// Mean entropy of the classifier's target predictions, minimized with
/// weight `gradScale`.
LossValue targetEntropyLoss(nn::NetworkParams& params, StepPass& pass, double gradScale = 1.0);

// Self-contained forms: run the forward pass, accumulate every gradient
// (including the feature extractor's), and return the loss value.

LossValue weightedClassifierLoss(nn::NetworkParams& params, const nn::Matrix& source, std::span<const int> labels,
                                 const weights::WeightTable& table, const ClassifierLossOptions& options = {});

LossValue weightedDomainLoss(nn::NetworkParams& params, const nn::Matrix& source, std::span<const int> labels,
                             const nn::Matrix& target, const weights::WeightTable& table, double lambda);

LossValue clusterLoss(nn::NetworkParams& params, const nn::Matrix& source, std::span<const int> labels,
                      const nn::Matrix& target, const weights::WeightTable& table);

}  // namespace sapda::losses
