#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sapda/network.hpp"
#include "sapda/rng.hpp"

namespace sapda::data {

/// Synthetic partial-DA task: |C_s| isotropic Gaussian blobs on a circle of
/// radius R in the (x0, x1) plane; the target domain holds only classes
/// 0..|C_t|-1, their centers mapped by x -> s * Rot(theta) * x + t.
struct PdaTaskSpec {
  int sourceClassCount = 8;
  int targetClassCount = 4;
  int samplesPerClass = 200;
  int inputDim = 2;
  double radius = 4.0;
  double noise = 0.45;
  double rotationDeg = 30.0;
  double scale = 1.1;
  /// Empty means the zero vector; otherwise length inputDim.
  std::vector<double> translation;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  /// Ground truth, for evaluation only: classes present in the target.
  std::vector<int> sharedClasses() const;

  friend bool operator==(const PdaTaskSpec&, const PdaTaskSpec&) = default;
};

/// The default benchmark "blobs8to4".
PdaTaskSpec blobs8to4(std::uint64_t seed = 1);

struct LabeledSet {
  nn::Matrix inputs;
  std::vector<int> labels;
  int classCount = 0;

  std::size_t size() const { return labels.size(); }
};

/// Target training data. No label field by construction.
struct UnlabeledSet {
  nn::Matrix inputs;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

enum class Domain { kSource, kTarget };

struct DomainBatch {
  nn::Matrix inputs;
  std::optional<std::vector<int>> labels;  // source batches only
  Domain domain = Domain::kSource;
};

struct PdaTask {
  PdaTaskSpec spec;
  LabeledSet source;
  UnlabeledSet targetTrain;
  LabeledSet targetTest;
  /// True labels of targetTrain rows; kept apart from the training path.
  std::vector<int> targetTrainTruth;
};

nn::Vector sourceCenter(const PdaTaskSpec& spec, int cls);
nn::Vector applyShift(const PdaTaskSpec& spec, const nn::Vector& x);
nn::Vector inverseShift(const PdaTaskSpec& spec, const nn::Vector& y);

/// Deterministic in spec (including seed). Each target class is split in
/// half: the first ceil(n/2) samples train, the rest test.
PdaTask generateTask(const PdaTaskSpec& spec);

/// Uniform sampling with replacement. With `balanced`, class counts are as
/// equal as possible (exact when batchSize is a multiple of the class count);
/// samples within a class are drawn with replacement. Only `rng` is mutated.
DomainBatch minibatch(const LabeledSet& set, std::size_t batchSize, Rng& rng, bool balanced = false);
DomainBatch minibatch(const UnlabeledSet& set, std::size_t batchSize, Rng& rng);

/// CSV with header `domain,class,x0,..,x{d-1}`; domain is one of source,
/// target_train, target_test. Values use 17 significant digits.
void writeCsv(std::ostream& out, const PdaTask& task);
/// Reads a dump produced by writeCsv. `spec` is attached as-is.
PdaTask readCsv(std::istream& in, const PdaTaskSpec& spec);

}  // namespace sapda::data
