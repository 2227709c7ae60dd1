#include <algorithm>
#include <cmath>
#include <optional>

#include "checks.hpp"
#include "sapda/losses.hpp"
#include "sapda/rng.hpp"

namespace sapda::checks {

using nn::Matrix;
using nn::NetworkParams;
using nn::SubNet;

double relativeError(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport checkGradient(const std::string& name, NetworkParams& params, const Objective& analyticObjective,
                              const std::vector<std::size_t>& indices, double h, const Objective& numericObjective) {
  const Objective& numeric = numericObjective ? numericObjective : analyticObjective;
  GradCheckReport report;
  report.name = name;

  params.zeroGradients();
  analyticObjective(params);
  std::vector<double> analytic;
  analytic.reserve(indices.size());
  for (std::size_t idx : indices) analytic.push_back(params.gradient(idx));
  params.zeroGradients();

  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t idx = indices[i];
    const double theta = params.parameter(idx);
    params.setParameter(idx, theta + h);
    const double up = numeric(params);
    params.zeroGradients();
    params.setParameter(idx, theta - h);
    const double down = numeric(params);
    params.zeroGradients();
    params.setParameter(idx, theta);

    const double fd = (up - down) / (2.0 * h);
    const double err = relativeError(analytic[i], fd);
    ++report.checked;
    if (err > report.maxRelError || report.checked == 1) {
      report.maxRelError = std::max(report.maxRelError, err);
      report.worstIndex = idx;
      report.worstAnalytic = analytic[i];
      report.worstNumeric = fd;
    }
  }
  return report;
}

std::vector<std::size_t> gradientIndices(const NetworkParams& params, std::span<const SubNet> fullNets,
                                         SubNet sampledNet, std::size_t randomCount, Rng& rng) {
  std::vector<std::size_t> out;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < params.parameterCount(); ++i) {
    const SubNet owner = params.ownerOf(i);
    if (std::find(fullNets.begin(), fullNets.end(), owner) != fullNets.end()) out.push_back(i);
    if (owner == sampledNet) pool.push_back(i);
  }
  randomCount = std::min(randomCount, pool.size());
  for (std::size_t i = 0; i < randomCount; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

namespace {

struct Fixture {
  NetworkParams params;
  Matrix source;
  std::vector<int> labels;
  Matrix target;
  std::vector<double> weights;  // per source sample
};

Fixture makeFixture(std::uint64_t seed) {
  nn::Architecture arch;
  arch.inputDim = 3;
  arch.hiddenWidth = 12;
  arch.hiddenLayers = 2;
  arch.featureDim = 6;
  arch.classCount = 5;
  Rng rng(seed);
  Rng init = rng.fork(1);
  Fixture f{NetworkParams(arch, init), Matrix(10, 3), {}, Matrix(9, 3), {}};
  Rng draw = rng.fork(2);
  for (Eigen::Index i = 0; i < f.source.size(); ++i) f.source.data()[i] = 1.5 * draw.normal();
  for (Eigen::Index i = 0; i < f.target.size(); ++i) f.target.data()[i] = 1.5 * draw.normal() + 0.3;
  // Classes 0..4 with weights {1, 1, 0.45, 0, 0}: the three weight levels.
  const double table[5] = {1.0, 1.0, 0.45, 0.0, 0.0};
  for (Eigen::Index i = 0; i < f.source.rows(); ++i) {
    const int y = static_cast<int>(draw.below(5));
    f.labels.push_back(y);
    f.weights.push_back(table[y]);
  }
  // Keep every weight level represented.
  f.labels[0] = 0;
  f.weights[0] = 1.0;
  f.labels[1] = 2;
  f.weights[1] = 0.45;
  f.labels[2] = 4;
  f.weights[2] = 0.0;
  return f;
}

std::vector<double> entropyWeights(const NetworkParams& params, const Matrix& inputs) {
  const nn::ForwardResult r = nn::forward(params, inputs, nn::Head::kClassifier);
  std::vector<double> m;
  for (Eigen::Index i = 0; i < r.probabilities().rows(); ++i) {
    const nn::Vector row = r.probabilities().row(i).transpose();
    m.push_back(losses::entropyWeight(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return m;
}

}  // namespace

std::vector<GradCheckReport> lossGradientSuite(std::uint64_t seed) {
  Fixture f = makeFixture(seed);
  Rng pick(seed ^ 0xC0FFEEULL);
  std::vector<GradCheckReport> reports;

  // The entropy weight m is a constant on the analytic side, so the numeric
  // objective folds the baseline m into the sample weights.
  const std::vector<double> m0 = entropyWeights(f.params, f.source);
  std::vector<double> wm(f.weights.size());
  for (std::size_t i = 0; i < wm.size(); ++i) wm[i] = f.weights[i] * m0[i];

  {
    const SubNet full[] = {SubNet::kClassifier};
    const auto idx = gradientIndices(f.params, full, SubNet::kFeature, 100, pick);
    auto analytic = [&](NetworkParams& p) {
      losses::StepPass pass(p, f.source);
      const double v = losses::weightedClassifierLoss(p, pass, f.labels, f.weights).value;
      pass.backward(p);
      return v;
    };
    auto numeric = [&](NetworkParams& p) {
      losses::StepPass pass(p, f.source);
      const double v = losses::weightedClassifierLoss(p, pass, f.labels, wm, {.entropyWeighting = false}).value;
      pass.backward(p);
      return v;
    };
    reports.push_back(checkGradient("classifier loss", f.params, analytic, idx, 1e-5, numeric));
  }
  {
    const SubNet full[] = {SubNet::kDomain};
    const auto idx = gradientIndices(f.params, full, SubNet::kFeature, 100, pick);
    // Without reversal every parameter receives d(-L_d).
    auto analytic = [&](NetworkParams& p) {
      losses::StepPass pass(p, f.source, &f.target);
      const double v = losses::weightedDomainLoss(p, pass, f.weights, {.entropyWeighting = true, .reversal = {}}).value;
      pass.backward(p);
      return -v;
    };
    auto numeric = [&](NetworkParams& p) {
      losses::StepPass pass(p, f.source, &f.target);
      const double v = losses::weightedDomainLoss(p, pass, wm, {.entropyWeighting = false, .reversal = {}}).value;
      pass.backward(p);
      return -v;
    };
    reports.push_back(checkGradient("domain loss", f.params, analytic, idx, 1e-5, numeric));
  }
  {
    const SubNet full[] = {SubNet::kCluster};
    const auto idx = gradientIndices(f.params, full, SubNet::kFeature, 100, pick);
    auto objective = [&](NetworkParams& p) {
      losses::StepPass pass(p, f.source, &f.target);
      const double v = losses::clusterLoss(p, pass, f.weights).value;
      pass.backward(p);
      return v;
    };
    reports.push_back(checkGradient("cluster loss", f.params, objective, idx));
  }
  {
    const SubNet full[] = {SubNet::kClassifier};
    const auto idx = gradientIndices(f.params, full, SubNet::kFeature, 100, pick);
    auto objective = [&](NetworkParams& p) {
      losses::StepPass pass(p, f.source, &f.target);
      const double v = losses::targetEntropyLoss(p, pass).value;
      pass.backward(p);
      return v;
    };
    reports.push_back(checkGradient("target entropy", f.params, objective, idx));
  }
  return reports;
}

ReversalReport reversalAntisymmetry(std::uint64_t seed, double lambda) {
  Fixture f = makeFixture(seed);
  ReversalReport report;
  report.lambda = lambda;

  auto run = [&](std::optional<nn::GradientReversal> reversal) {
    f.params.zeroGradients();
    losses::StepPass pass(f.params, f.source, &f.target);
    losses::weightedDomainLoss(f.params, pass, f.weights, {.entropyWeighting = true, .reversal = reversal});
    pass.backward(f.params);
    std::vector<double> g(f.params.parameterCount());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = f.params.gradient(i);
    f.params.zeroGradients();
    return g;
  };
  const std::vector<double> reversed = run(nn::GradientReversal(lambda));
  const std::vector<double> plain = run(std::nullopt);

  report.headsIdentical = true;
  double scale = 0.0;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    if (f.params.ownerOf(i) == SubNet::kFeature) {
      ++report.checked;
      report.maxResidual = std::max(report.maxResidual, std::abs(reversed[i] + lambda * plain[i]));
      scale = std::max(scale, std::abs(lambda * plain[i]));
    } else if (reversed[i] != plain[i]) {
      report.headsIdentical = false;
    }
  }
  // Residuals are measured against the largest reversed component.
  if (scale > 0.0) report.maxResidual /= scale;
  report.passed = report.checked > 0 && report.headsIdentical && report.maxResidual <= 1e-12;
  return report;
}

}  // namespace sapda::checks
