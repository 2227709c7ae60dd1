#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "checks.hpp"
#include "sapda/data.hpp"
#include "sapda/losses.hpp"
#include "sapda/rng.hpp"
#include "sapda/weight_eval.hpp"

namespace sapda::checks {

namespace {

using nn::Matrix;
using weights::ClassWeightVector;

template <typename... Parts>
std::string cat(const Parts&... parts) {
  std::ostringstream out;
  out.precision(6);
  (out << ... << parts);
  return out.str();
}

std::vector<double> randomSimplexRow(Rng& rng, std::size_t n) {
  std::vector<double> row(n);
  double sum = 0.0;
  for (double& p : row) {
    p = -std::log(1.0 - rng.uniform());
    sum += p;
  }
  for (double& p : row) p /= sum;
  return row;
}

ClassWeightVector randomClassWeights(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  const int modes = 1 + static_cast<int>(rng.below(3));
  std::vector<double> centers(static_cast<std::size_t>(modes));
  for (double& c : centers) c = rng.uniform(0.02, 1.0);
  for (double& x : v) x = std::max(1e-4, centers[rng.below(centers.size())] + 0.05 * rng.normal());
  return ClassWeightVector(v).normalized();
}

CheckLine simplexBounds(std::uint64_t seed) {
  Rng rng(seed);
  double worstSum = 0.0;
  bool logisticOpen = true;
  bool normalizationOk = true;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.below(20));
    const Eigen::Index cols = 2 + static_cast<Eigen::Index>(rng.below(9));
    Matrix logits(rows, cols);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 30.0 * rng.normal();
    const Matrix p = nn::softmaxRows(logits);
    for (Eigen::Index i = 0; i < rows; ++i) worstSum = std::max(worstSum, std::abs(p.row(i).sum() - 1.0));
    const Matrix s = nn::logistic(logits.col(0));
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double v = s(i, 0);
      if (std::abs(logits(i, 0)) < 30.0 && !(v > 0.0 && v < 1.0)) logisticOpen = false;
    }
    const ClassWeightVector w = weights::computeClassWeights(p);
    if (w.max() != 1.0 || w.min() < 0.0) normalizationOk = false;
  }
  const bool ok = worstSum <= 1e-12 && logisticOpen && normalizationOk;
  return {"simplex and normalization bounds", ok,
          cat("max |row sum - 1| = ", worstSum, ", logistic in (0,1): ", logisticOpen,
              ", max W_c == 1: ", normalizationOk)};
}

CheckLine entropyWeightBounds(std::uint64_t seed) {
  Rng rng(seed);
  double lo = 2.0;
  double hi = 1.0;
  bool ok = true;
  auto probe = [&](const std::vector<double>& row) {
    const double m = losses::entropyWeight(row);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    if (!(m > 1.0 && m <= 2.0)) ok = false;
  };
  for (int trial = 0; trial < 2000; ++trial) probe(randomSimplexRow(rng, 2 + rng.below(15)));
  for (std::size_t n = 1; n <= 64; n *= 2) {
    probe(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    std::vector<double> onehot(n, 0.0);
    onehot[n - 1] = 1.0;
    probe(onehot);
  }
  return {"entropy weight m in (1, 2]", ok, cat("observed range [", lo, ", ", hi, "]")};
}

CheckLine weightTableImage(std::uint64_t seed) {
  Rng rng(seed);
  std::size_t violations = 0;
  std::string first;
  for (int trial = 0; trial < 500; ++trial) {
    const ClassWeightVector w = randomClassWeights(rng, 4 + rng.below(9));
    const weights::Selection s = weights::selectK(w);
    const weights::WeightTable t = weights::assignWeights(w, s.kStar, s.partitionFor(s.kStar));
    const weights::Partition& p = s.partitionFor(s.kStar);
    bool ok = true;
    if (s.kStar == 1) {
      ok = std::all_of(t.perClassWeight.begin(), t.perClassWeight.end(), [](double v) { return v == 1.0; });
    } else {
      double sharedMin = 2.0;
      double outlierMax = -1.0;
      for (std::size_t j = 0; j < w.classCount(); ++j) {
        if (p.assignment[j] == 0) sharedMin = std::min(sharedMin, w[j]);
        if (p.assignment[j] == s.kStar - 1) outlierMax = std::max(outlierMax, w[j]);
      }
      const double alpha3 = s.kStar == 3 ? p.groupMeans[1] : -1.0;
      for (std::size_t j = 0; j < w.classCount(); ++j) {
        const double v = t.perClassWeight[j];
        const bool inImage = v == 0.0 || v == 1.0 || (s.kStar == 3 && v == alpha3);
        if (!inImage) ok = false;
        if (w[j] >= sharedMin && v != 1.0) ok = false;
      }
      if (s.kStar == 3 && !(alpha3 > outlierMax && alpha3 < sharedMin && alpha3 > 0.0 && alpha3 < 1.0)) ok = false;
    }
    if (!ok) {
      ++violations;
      if (first.empty()) first = cat(" first at trial ", trial);
    }
  }
  return {"weight table image in {0, alpha3, 1}", violations == 0, cat(violations, " violations in 500 vectors", first)};
}

CheckLine monotoneCost(std::uint64_t seed) {
  Rng rng(seed);
  std::size_t violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const ClassWeightVector w = randomClassWeights(rng, 3 + rng.below(10));
    const double c1 = weights::optimalPartition(w, 1).cost;
    const double c2 = weights::optimalPartition(w, 2).cost;
    const double c3 = weights::optimalPartition(w, 3).cost;
    if (!(c3 <= c2 && c2 <= c1)) ++violations;
  }
  return {"monotone cost delta3 <= delta2 <= delta1", violations == 0, cat(violations, " violations in 500 vectors")};
}

CheckLine permutationEquivariance(std::uint64_t seed) {
  Rng rng(seed);
  std::size_t violations = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 4 + rng.below(9);
    const ClassWeightVector w = randomClassWeights(rng, n);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<double> permuted(n);
    for (std::size_t j = 0; j < n; ++j) permuted[perm[j]] = w[j];
    const weights::WeightTable a = weights::evaluateWeights(w);
    const weights::WeightTable b = weights::evaluateWeights(ClassWeightVector(permuted));
    bool same = a.kStar == b.kStar;
    for (std::size_t j = 0; j < n; ++j) same = same && a.perClassWeight[j] == b.perClassWeight[perm[j]];
    if (!same) ++violations;
  }
  return {"permutation equivariance", violations == 0, cat(violations, " violations in 300 vectors")};
}

CheckLine scaleBehaviour(std::uint64_t seed) {
  Rng rng(seed);
  std::size_t violations = 0;
  double worstCost = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 4 + rng.below(9);
    const ClassWeightVector w = randomClassWeights(rng, n);
    const double c = std::exp(rng.uniform(-3.0, 3.0));
    std::vector<double> scaled(n);
    for (std::size_t j = 0; j < n; ++j) scaled[j] = c * w[j];
    const ClassWeightVector ws(scaled);
    bool ok = true;
    for (int k = 1; k <= 3; ++k) {
      const weights::Partition a = weights::optimalPartition(w, k);
      const weights::Partition b = weights::optimalPartition(ws, k);
      ok = ok && a.assignment == b.assignment;
      const double rel = std::abs(b.cost - c * c * a.cost) / std::max(c * c * a.cost, 1e-300);
      if (a.cost > 0.0) worstCost = std::max(worstCost, rel);
      if (a.cost > 0.0 && rel > 1e-9) ok = false;
    }
    const weights::WeightTable ta = weights::evaluateWeights(w);
    const weights::WeightTable tb = weights::evaluateWeights(ws.normalized());
    ok = ok && ta.kStar == tb.kStar;
    for (std::size_t j = 0; j < n; ++j) {
      const bool hardA = ta.perClassWeight[j] == 0.0 || ta.perClassWeight[j] == 1.0;
      const bool hardB = tb.perClassWeight[j] == 0.0 || tb.perClassWeight[j] == 1.0;
      if (hardA != hardB || (hardA && ta.perClassWeight[j] != tb.perClassWeight[j])) ok = false;
    }
    if (!ok) ++violations;
  }
  return {"scale behaviour of partitions and weights", violations == 0,
          cat(violations, " violations in 300 vectors, max cost ratio error ", worstCost)};
}

CheckLine chTranslationInvariance(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 4 + rng.below(9);
    const ClassWeightVector w = randomClassWeights(rng, n);
    const double shift = rng.uniform(0.0, 5.0);
    std::vector<double> moved(n);
    for (std::size_t j = 0; j < n; ++j) moved[j] = w[j] + shift;
    const ClassWeightVector wm(moved);
    for (int k = 2; k <= 3; ++k) {
      const weights::Partition p = weights::optimalPartition(w, k);
      const weights::Partition q = weights::partitionFromAssignment(wm.values(), p.assignment, k);
      const double a = weights::chIndex(w, p);
      const double b = weights::chIndex(wm, q);
      if (std::isinf(a) || std::isinf(b)) continue;
      worst = std::max(worst, std::abs(a - b) / std::max(a, 1e-300));
    }
  }
  return {"CH translation invariance", worst < 1e-6, cat("max relative change ", worst)};
}

CheckLine outlierInvisibility(std::uint64_t seed) {
  Rng rng(seed);
  nn::Architecture arch;
  arch.hiddenWidth = 16;
  arch.featureDim = 8;
  arch.classCount = 6;
  Rng init = rng.fork(1);
  nn::NetworkParams params(arch, init);
  const Eigen::Index ns = 24;
  Matrix source(ns, 2);
  Matrix target(20, 2);
  std::vector<int> labels(static_cast<std::size_t>(ns));
  for (Eigen::Index i = 0; i < ns; ++i) {
    labels[static_cast<std::size_t>(i)] = static_cast<int>(i % 6);
    source(i, 0) = rng.normal() * 3.0;
    source(i, 1) = rng.normal() * 3.0;
  }
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal() * 3.0;
  weights::WeightTable table = weights::WeightTable::uniform(6);
  table.kStar = 2;
  table.perClassWeight = {1.0, 1.0, 1.0, 0.0, 0.0, 0.0};

  auto gradients = [&](const Matrix& src) {
    params.zeroGradients();
    losses::weightedClassifierLoss(params, src, labels, table);
    losses::StepPass pass(params, src, &target);
    losses::weightedDomainLoss(params, pass, losses::sampleWeights(table, labels));
    pass.backward(params);
    std::vector<double> g(params.parameterCount());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = params.gradient(i);
    params.zeroGradients();
    return g;
  };
  const std::vector<double> before = gradients(source);
  Matrix perturbed = source;
  for (Eigen::Index i = 0; i < ns; ++i) {
    if (table.perClassWeight[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] == 0.0) {
      perturbed(i, 0) += rng.normal() * 5.0;
      perturbed(i, 1) -= 7.0;
    }
  }
  const std::vector<double> after = gradients(perturbed);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < before.size(); ++i) differing += before[i] != after[i] ? 1 : 0;
  return {"outlier invisibility (w = 0 samples)", differing == 0,
          cat(differing, " of ", before.size(), " gradient entries changed")};
}

CheckLine clusterCalibration() {
  nn::Architecture arch;
  arch.hiddenWidth = 4;
  arch.featureDim = 3;
  arch.classCount = 4;
  // With all-zero weights the features are 0 and the cluster output is the
  // logistic of its bias, so the loss is a function of one number.
  nn::NetworkParams params = nn::NetworkParams::zeros(arch);
  const Matrix source = Matrix::Zero(1, 2);
  const Matrix target = Matrix::Zero(1, 2);
  bool ok = true;
  double worstGrad = 0.0;
  for (double t : {0.0, 0.2, 0.5, 0.8}) {
    // Source target t and target target 1 share the logit, so the optimum sits
    // at p = (t + 1) / 2.
    const double pStar = (t + 1.0) / 2.0;
    auto lossAt = [&](double p) {
      params.mutableNet(nn::SubNet::kCluster).layers.back().bias(0) = std::log(p / (1.0 - p));
      params.zeroGradients();
      losses::StepPass pass(params, source, &target);
      const std::vector<double> targets = {t};
      const double v = losses::clusterLoss(params, pass, targets).value;
      pass.backward(params);
      return v;
    };
    const double best = lossAt(pStar);
    worstGrad = std::max(worstGrad, std::abs(params.grad(nn::SubNet::kCluster).layers.back().bias(0)));
    if (!(lossAt(pStar - 0.01) > best && lossAt(pStar + 0.01) > best)) ok = false;
  }
  return {"cluster loss minimized at p = t", ok && worstGrad < 1e-12, cat("max |dL/dlogit| at optimum ", worstGrad)};
}

CheckLine shiftInverse() {
  double worst = 0.0;
  for (int ct : {1, 4, 8}) {
    data::PdaTaskSpec spec = data::blobs8to4();
    spec.targetClassCount = ct;
    spec.inputDim = 3;
    spec.translation = {0.5, -1.25, 2.0};
    for (int c = 0; c < ct; ++c) {
      const nn::Vector center = data::sourceCenter(spec, c);
      const nn::Vector back = data::inverseShift(spec, data::applyShift(spec, center));
      worst = std::max(worst, (back - center).cwiseAbs().maxCoeff());
    }
  }
  return {"shift inverse recovers source centers", worst <= 1e-9, cat("max deviation ", worst)};
}

CheckLine generationDeterminism() {
  const data::PdaTask a = data::generateTask(data::blobs8to4(7));
  const data::PdaTask b = data::generateTask(data::blobs8to4(7));
  const bool same = a.source.inputs == b.source.inputs && a.source.labels == b.source.labels &&
                    a.targetTrain.inputs == b.targetTrain.inputs && a.targetTest.inputs == b.targetTest.inputs &&
                    a.targetTest.labels == b.targetTest.labels;
  return {"task generation determinism", same, same ? "bit-identical" : "datasets differ"};
}

CheckLine scheduleShape() {
  const nn::LrSchedule lr;
  bool ok = lr.rate(0.0) == lr.gamma0;
  double previous = lr.rate(0.0);
  for (int i = 1; i <= 100; ++i) {
    const double r = lr.rate(i / 100.0);
    if (!(r > 0.0 && r <= previous)) ok = false;
    previous = r;
  }
  const double expected = 0.01 / std::pow(11.0, 0.75);
  ok = ok && std::abs(lr.rate(1.0) - expected) < 1e-15;
  return {"learning rate positive and non-increasing", ok, cat("rate(1) = ", lr.rate(1.0))};
}

CheckLine stableTape() {
  nn::Architecture arch;
  arch.hiddenWidth = 4;
  arch.featureDim = 3;
  arch.classCount = 4;
  Rng rng(3);
  nn::NetworkParams params(arch, rng);
  const Matrix x = Matrix::Ones(2, 2);
  const nn::ForwardResult r = nn::forward(params, x, nn::Head::kClassifier);
  params.setParameter(0, params.parameter(0) + 1.0);
  bool rejected = false;
  try {
    nn::backward(params, r, Matrix::Zero(2, 4));
  } catch (const std::logic_error&) {
    rejected = true;
  }
  return {"stale tape rejected", rejected, rejected ? "contract violation raised" : "stale tape accepted"};
}

}  // namespace

std::vector<CheckLine> runInvariantChecks(std::uint64_t seed) {
  std::vector<CheckLine> lines;
  {
    const OracleReport r = partitionOracleSuite(500, seed);
    lines.push_back({"partition oracle (500 vectors, k = 2, 3)", r.passed(),
                     cat(r.cases, " cases, ", r.mismatches, " mismatches", r.firstFailure.empty() ? "" : "; ",
                         r.firstFailure)});
  }
  {
    const OracleReport r = chOracleSuite(200, seed + 1);
    lines.push_back({"CH reference (200 pairs)", r.passed(), cat("max relative error ", r.maxRelError)});
  }
  for (const GradCheckReport& g : lossGradientSuite(seed + 2)) {
    lines.push_back({"gradient check: " + g.name, g.passed(),
                     cat(g.checked, " parameters, max relative error ", g.maxRelError)});
  }
  for (double lambda : {0.0, 1.0, 0.37, 2.0}) {
    const ReversalReport r = reversalAntisymmetry(seed + 3, lambda);
    lines.push_back({cat("gradient reversal antisymmetry (lambda = ", lambda, ")"), r.passed,
                     cat(r.checked, " parameters, max relative residual ", r.maxResidual,
                         r.headsIdentical ? "" : ", head gradients changed")});
  }
  lines.push_back(simplexBounds(seed + 4));
  lines.push_back(entropyWeightBounds(seed + 5));
  lines.push_back(weightTableImage(seed + 6));
  lines.push_back(monotoneCost(seed + 7));
  lines.push_back(permutationEquivariance(seed + 8));
  lines.push_back(scaleBehaviour(seed + 9));
  lines.push_back(chTranslationInvariance(seed + 10));
  lines.push_back(outlierInvisibility(seed + 11));
  lines.push_back(clusterCalibration());
  lines.push_back(shiftInverse());
  lines.push_back(generationDeterminism());
  lines.push_back(scheduleShape());
  lines.push_back(stableTape());
  return lines;
}

bool runInvariantSuite(std::ostream& out, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  bool all = true;
  for (const CheckLine& line : runInvariantChecks(seed)) {
    out << (line.passed ? "PASS " : "FAIL ") << line.name << " -- " << line.detail << '\n';
    all = all && line.passed;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << (all ? "all checks passed" : "some checks failed") << " in " << seconds << " s\n";
  return all;
}

}  // namespace sapda::checks
