#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "sapda/rng.hpp"

namespace sapda::nn {

/// Batches are row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation { kIdentity, kTanh };

struct DenseLayer {
  Matrix weight;  // outputs x inputs
  Vector bias;    // outputs
  Activation activation = Activation::kIdentity;

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

/// A feed-forward stack of dense layers. Gradient stores reuse this type so
/// the shape of a gradient always mirrors the shape of its parameters.
struct Mlp {
  std::vector<DenseLayer> layers;

  Eigen::Index inputDim() const { return layers.front().inputs(); }
  Eigen::Index outputDim() const { return layers.back().outputs(); }
  std::size_t parameterCount() const;
  Mlp zerosLike() const;
  bool sameShape(const Mlp& other) const;
  bool allFinite() const;
};

enum class SubNet : std::size_t { kFeature = 0, kClassifier = 1, kDomain = 2, kCluster = 3 };
inline constexpr std::array<SubNet, 4> kAllSubNets = {SubNet::kFeature, SubNet::kClassifier,
                                                      SubNet::kDomain, SubNet::kCluster};
const char* subNetName(SubNet net);

enum class Head { kClassifier, kDomain, kCluster };

struct Architecture {
  int inputDim = 2;
  int hiddenWidth = 64;
  int hiddenLayers = 2;
  int featureDim = 16;
  int classCount = 8;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Parameters of the four sub-networks (feature extractor, source classifier,
/// domain discriminator, cluster classifier) with a gradient store of
/// identical shape. Every mutation of the parameters bumps `version()` so
/// activation tapes recorded earlier can be detected as stale.
class NetworkParams {
 public:
  /// Glorot-uniform weights, zero biases.
  NetworkParams(const Architecture& arch, Rng& rng);

  /// All weights and biases zero.
  static NetworkParams zeros(const Architecture& arch);

  const Architecture& architecture() const { return arch_; }
  const Mlp& net(SubNet which) const { return nets_[index(which)]; }
  const Mlp& grad(SubNet which) const { return grads_[index(which)]; }
  Mlp& grad(SubNet which) { return grads_[index(which)]; }

  /// Mutable parameter access; invalidates outstanding tapes.
  Mlp& mutableNet(SubNet which);

  std::uint64_t version() const { return version_; }

  /// Flat view over all scalars, ordered by sub-network, layer, weight
  /// (row-major), then bias.
  std::size_t parameterCount() const;
  double parameter(std::size_t flatIndex) const;
  void setParameter(std::size_t flatIndex, double value);
  double gradient(std::size_t flatIndex) const;
  /// Sub-network that owns a flat index.
  SubNet ownerOf(std::size_t flatIndex) const;

  void zeroGradients();
  bool parametersFinite() const;
  bool gradientsFinite() const;
  bool gradientShapeMatches() const;

  /// Applies `theta -= rate * grad` to every scalar and bumps the version.
  void applyGradients(double rate);

 private:
  explicit NetworkParams(const Architecture& arch);
  static std::size_t index(SubNet which) { return static_cast<std::size_t>(which); }
  double* locate(std::array<Mlp, 4>& store, std::size_t flatIndex);
  const double* locate(const std::array<Mlp, 4>& store, std::size_t flatIndex) const;

  Architecture arch_;
  std::array<Mlp, 4> nets_;
  std::array<Mlp, 4> grads_;
  std::uint64_t version_ = 0;
};

/// Activations recorded by the feature extractor. activations.front() is the
/// input batch, activations.back() the feature batch.
struct FeatureTape {
  const NetworkParams* source = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix> activations;

  const Matrix& features() const { return activations.back(); }
};

struct HeadTape {
  const NetworkParams* source = nullptr;
  std::uint64_t version = 0;
  Head head = Head::kClassifier;
  Matrix input;
  Matrix logits;
  /// Softmax rows for the classifier head, logistic column otherwise.
  Matrix probabilities;
};

struct ForwardResult {
  FeatureTape features;
  HeadTape head;

  const Matrix& probabilities() const { return head.probabilities; }
};

FeatureTape forwardFeatures(const NetworkParams& params, const Matrix& inputs);
HeadTape forwardHead(const NetworkParams& params, Head head, const Matrix& features);
ForwardResult forward(const NetworkParams& params, const Matrix& inputs, Head head);

/// Backpropagates d(loss)/d(logits) through the head into its gradient store
/// and returns d(loss)/d(features).
Matrix backwardHead(NetworkParams& params, const HeadTape& tape, const Matrix& logitGrad);
/// Backpropagates d(loss)/d(features) into the feature extractor's gradients.
void backwardFeatures(NetworkParams& params, const FeatureTape& tape, const Matrix& featureGrad);
/// Full backward pass for a single-head forward.
void backward(NetworkParams& params, const ForwardResult& tape, const Matrix& logitGrad);

Matrix softmaxRows(const Matrix& logits);
Matrix logistic(const Matrix& logits);

/// Identity on the forward pass; scales the backward gradient by -lambda.
class GradientReversal {
 public:
  explicit GradientReversal(double lambda);
  const Matrix& forward(const Matrix& features) const { return features; }
  Matrix backward(const Matrix& upstream) const { return -lambda_ * upstream; }
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

/// Reversal strength ramp 2 / (1 + exp(-10 q)) - 1, rising from 0 to ~1.
double reversalRamp(double progress);

/// Annealed learning rate gamma0 / (1 + eta q)^alpha.
struct LrSchedule {
  double gamma0 = 0.01;
  double eta = 10.0;
  double alpha = 0.75;

  double rate(double progress) const;
};

/// theta <- theta - rate(q) * grad, then zeroes the gradient store. Throws
/// DivergenceError on non-finite gradients before touching the parameters.
void sgdStep(NetworkParams& params, const LrSchedule& schedule, double progress);

}  // namespace sapda::nn
