#include "sapda/network.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "sapda/errors.hpp"

namespace sapda::nn {

namespace {

DenseLayer makeLayer(Eigen::Index inputs, Eigen::Index outputs, Activation activation) {
  DenseLayer layer;
  layer.weight = Matrix::Zero(outputs, inputs);
  layer.bias = Vector::Zero(outputs);
  layer.activation = activation;
  return layer;
}

std::array<Mlp, 4> buildShapes(const Architecture& arch) {
  if (arch.inputDim < 1 || arch.hiddenWidth < 1 || arch.hiddenLayers < 0 || arch.featureDim < 1 ||
      arch.classCount < 1) {
    throw ConfigError("network architecture dimensions must be positive");
  }
  std::array<Mlp, 4> nets;
  Mlp& feature = nets[0];
  Eigen::Index width = arch.inputDim;
  for (int i = 0; i < arch.hiddenLayers; ++i) {
    feature.layers.push_back(makeLayer(width, arch.hiddenWidth, Activation::kTanh));
    width = arch.hiddenWidth;
  }
  feature.layers.push_back(makeLayer(width, arch.featureDim, Activation::kTanh));
  nets[1].layers.push_back(makeLayer(arch.featureDim, arch.classCount, Activation::kIdentity));
  nets[2].layers.push_back(makeLayer(arch.featureDim, 1, Activation::kIdentity));
  nets[3].layers.push_back(makeLayer(arch.featureDim, 1, Activation::kIdentity));
  return nets;
}

void checkTape(const NetworkParams& params, const NetworkParams* source, std::uint64_t version) {
  if (source != &params) {
    throw ContractViolation("backward: tape was recorded against a different parameter store");
  }
  if (version != params.version()) {
    std::ostringstream msg;
    msg << "backward: stale tape (recorded at version " << version << ", parameters now at "
        << params.version() << ")";
    throw ContractViolation(msg.str());
  }
}

SubNet headNet(Head head) {
  switch (head) {
    case Head::kClassifier:
      return SubNet::kClassifier;
    case Head::kDomain:
      return SubNet::kDomain;
    case Head::kCluster:
      return SubNet::kCluster;
  }
  return SubNet::kClassifier;
}

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  Matrix z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  if (layer.activation == Activation::kTanh) z = z.array().tanh().matrix();
  return z;
}

// Accumulates the layer's parameter gradient and returns d/d(input).
Matrix backLayer(const DenseLayer& layer, DenseLayer& grad, const Matrix& input,
                 const Matrix& output, const Matrix& outputGrad) {
  Matrix preGrad = outputGrad;
  if (layer.activation == Activation::kTanh) {
    preGrad = (outputGrad.array() * (1.0 - output.array().square())).matrix();
  }
  grad.weight.noalias() += preGrad.transpose() * input;
  grad.bias.noalias() += preGrad.colwise().sum().transpose();
  return preGrad * layer.weight;
}

}  // namespace

std::size_t Mlp::parameterCount() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

Mlp Mlp::zerosLike() const {
  Mlp out;
  for (const auto& layer : layers) out.layers.push_back(makeLayer(layer.inputs(), layer.outputs(), layer.activation));
  return out;
}

bool Mlp::sameShape(const Mlp& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

bool Mlp::allFinite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

const char* subNetName(SubNet net) {
  switch (net) {
    case SubNet::kFeature:
      return "feature";
    case SubNet::kClassifier:
      return "classifier";
    case SubNet::kDomain:
      return "domain";
    case SubNet::kCluster:
      return "cluster";
  }
  return "?";
}

NetworkParams::NetworkParams(const Architecture& arch) : arch_(arch), nets_(buildShapes(arch)) {
  for (std::size_t i = 0; i < nets_.size(); ++i) grads_[i] = nets_[i].zerosLike();
}

NetworkParams::NetworkParams(const Architecture& arch, Rng& rng) : NetworkParams(arch) {
  for (auto& net : nets_) {
    for (auto& layer : net.layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs() + layer.outputs()));
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
      }
    }
  }
}

NetworkParams NetworkParams::zeros(const Architecture& arch) { return NetworkParams(arch); }

Mlp& NetworkParams::mutableNet(SubNet which) {
  ++version_;
  return nets_[index(which)];
}

std::size_t NetworkParams::parameterCount() const {
  std::size_t n = 0;
  for (const auto& net : nets_) n += net.parameterCount();
  return n;
}

const double* NetworkParams::locate(const std::array<Mlp, 4>& store, std::size_t flatIndex) const {
  std::size_t remaining = flatIndex;
  for (const auto& net : store) {
    for (const auto& layer : net.layers) {
      const auto w = static_cast<std::size_t>(layer.weight.size());
      if (remaining < w) return layer.weight.data() + remaining;
      remaining -= w;
      const auto b = static_cast<std::size_t>(layer.bias.size());
      if (remaining < b) return layer.bias.data() + remaining;
      remaining -= b;
    }
  }
  throw std::out_of_range("parameter index " + std::to_string(flatIndex) + " out of range");
}

double* NetworkParams::locate(std::array<Mlp, 4>& store, std::size_t flatIndex) {
  return const_cast<double*>(std::as_const(*this).locate(store, flatIndex));
}

double NetworkParams::parameter(std::size_t flatIndex) const { return *locate(nets_, flatIndex); }

void NetworkParams::setParameter(std::size_t flatIndex, double value) {
  *locate(nets_, flatIndex) = value;
  ++version_;
}

double NetworkParams::gradient(std::size_t flatIndex) const { return *locate(grads_, flatIndex); }

SubNet NetworkParams::ownerOf(std::size_t flatIndex) const {
  std::size_t remaining = flatIndex;
  for (SubNet which : kAllSubNets) {
    const std::size_t n = nets_[index(which)].parameterCount();
    if (remaining < n) return which;
    remaining -= n;
  }
  throw std::out_of_range("parameter index " + std::to_string(flatIndex) + " out of range");
}

void NetworkParams::zeroGradients() {
  for (auto& net : grads_) {
    for (auto& layer : net.layers) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
  }
}

bool NetworkParams::parametersFinite() const {
  for (const auto& net : nets_) {
    if (!net.allFinite()) return false;
  }
  return true;
}

bool NetworkParams::gradientsFinite() const {
  for (const auto& net : grads_) {
    if (!net.allFinite()) return false;
  }
  return true;
}

bool NetworkParams::gradientShapeMatches() const {
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    if (!nets_[i].sameShape(grads_[i])) return false;
  }
  return true;
}

void NetworkParams::applyGradients(double rate) {
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    for (std::size_t l = 0; l < nets_[i].layers.size(); ++l) {
      nets_[i].layers[l].weight.noalias() -= rate * grads_[i].layers[l].weight;
      nets_[i].layers[l].bias.noalias() -= rate * grads_[i].layers[l].bias;
    }
  }
  ++version_;
}

FeatureTape forwardFeatures(const NetworkParams& params, const Matrix& inputs) {
  const Mlp& net = params.net(SubNet::kFeature);
  if (inputs.rows() == 0) throw ConfigError("forward: empty batch");
  if (inputs.cols() != net.inputDim()) {
    std::ostringstream msg;
    msg << "forward: input dimension " << inputs.cols() << " does not match feature extractor input "
        << net.inputDim();
    throw ConfigError(msg.str());
  }
  FeatureTape tape;
  tape.source = &params;
  tape.version = params.version();
  tape.activations.reserve(net.layers.size() + 1);
  tape.activations.push_back(inputs);
  for (const auto& layer : net.layers) tape.activations.push_back(affine(layer, tape.activations.back()));
  return tape;
}

HeadTape forwardHead(const NetworkParams& params, Head head, const Matrix& features) {
  const Mlp& net = params.net(headNet(head));
  if (features.cols() != net.inputDim()) {
    throw ConfigError("forward: feature dimension does not match head input");
  }
  HeadTape tape;
  tape.source = &params;
  tape.version = params.version();
  tape.head = head;
  tape.input = features;
  Matrix z = features;
  for (const auto& layer : net.layers) z = affine(layer, z);
  tape.logits = std::move(z);
  tape.probabilities = head == Head::kClassifier ? softmaxRows(tape.logits) : logistic(tape.logits);
  return tape;
}

ForwardResult forward(const NetworkParams& params, const Matrix& inputs, Head head) {
  ForwardResult result;
  result.features = forwardFeatures(params, inputs);
  result.head = forwardHead(params, head, result.features.features());
  return result;
}

Matrix backwardHead(NetworkParams& params, const HeadTape& tape, const Matrix& logitGrad) {
  checkTape(params, tape.source, tape.version);
  if (logitGrad.rows() != tape.logits.rows() || logitGrad.cols() != tape.logits.cols()) {
    throw ContractViolation("backward: upstream gradient shape does not match head logits");
  }
  const SubNet which = headNet(tape.head);
  const Mlp& net = params.net(which);
  Mlp& grad = params.grad(which);
  // Heads may be deeper than one layer; recompute intermediate activations.
  std::vector<Matrix> acts{tape.input};
  for (const auto& layer : net.layers) acts.push_back(affine(layer, acts.back()));
  Matrix upstream = logitGrad;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    upstream = backLayer(net.layers[l], grad.layers[l], acts[l], acts[l + 1], upstream);
  }
  return upstream;
}

void backwardFeatures(NetworkParams& params, const FeatureTape& tape, const Matrix& featureGrad) {
  checkTape(params, tape.source, tape.version);
  const Matrix& features = tape.features();
  if (featureGrad.rows() != features.rows() || featureGrad.cols() != features.cols()) {
    throw ContractViolation("backward: feature gradient shape does not match feature batch");
  }
  const Mlp& net = params.net(SubNet::kFeature);
  Mlp& grad = params.grad(SubNet::kFeature);
  Matrix upstream = featureGrad;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    upstream = backLayer(net.layers[l], grad.layers[l], tape.activations[l], tape.activations[l + 1], upstream);
  }
}

void backward(NetworkParams& params, const ForwardResult& tape, const Matrix& logitGrad) {
  const Matrix featureGrad = backwardHead(params, tape.head, logitGrad);
  backwardFeatures(params, tape.features, featureGrad);
}

Matrix softmaxRows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix logistic(const Matrix& logits) {
  return logits.unaryExpr([](double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
}

GradientReversal::GradientReversal(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("gradient reversal: lambda must be non-negative");
}

double reversalRamp(double progress) { return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0; }

double LrSchedule::rate(double progress) const {
  return gamma0 / std::pow(1.0 + eta * progress, alpha);
}

void sgdStep(NetworkParams& params, const LrSchedule& schedule, double progress) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw std::invalid_argument("sgdStep: progress must lie in [0, 1]");
  }
  if (!params.gradientsFinite()) {
    std::ostringstream msg;
    msg << "sgdStep: non-finite gradient in";
    for (SubNet which : kAllSubNets) {
      if (!params.grad(which).allFinite()) msg << ' ' << subNetName(which);
    }
    msg << " at progress " << progress;
    throw DivergenceError(msg.str());
  }
  params.applyGradients(schedule.rate(progress));
  params.zeroGradients();
  if (!params.parametersFinite()) throw DivergenceError("sgdStep: update produced non-finite parameters");
}

}  // namespace sapda::nn
