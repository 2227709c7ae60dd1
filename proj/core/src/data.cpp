#include "sapda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sapda/errors.hpp"

namespace sapda::data {

namespace {

constexpr std::uint64_t kSourceStream = 0x5EED0001;
constexpr std::uint64_t kTargetStream = 0x5EED0002;

nn::Vector translationOf(const PdaTaskSpec& spec) {
  nn::Vector t = nn::Vector::Zero(spec.inputDim);
  for (std::size_t i = 0; i < spec.translation.size(); ++i) t(static_cast<Eigen::Index>(i)) = spec.translation[i];
  return t;
}

void appendSample(nn::Matrix& inputs, Eigen::Index row, const nn::Vector& center, double noise, Rng& rng) {
  for (Eigen::Index d = 0; d < center.size(); ++d) inputs(row, d) = center(d) + noise * rng.normal();
}

}  // namespace

void PdaTaskSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid task spec: " + what); };
  if (sourceClassCount < 1) fail("source_classes must be >= 1");
  if (targetClassCount < 1) fail("target_classes must be >= 1");
  if (targetClassCount > sourceClassCount) fail("target_classes must be <= source_classes");
  if (samplesPerClass < 1) fail("samples_per_class must be >= 1");
  if (inputDim < 2) fail("input_dim must be >= 2");
  if (!(radius > 0.0) || !std::isfinite(radius)) fail("radius must be > 0");
  if (!(noise > 0.0) || !std::isfinite(noise)) fail("noise must be > 0");
  if (!(scale > 0.0) || !std::isfinite(scale)) fail("scale must be > 0");
  if (!std::isfinite(rotationDeg)) fail("rotation_deg must be finite");
  if (!translation.empty() && translation.size() != static_cast<std::size_t>(inputDim)) {
    fail("translation must be empty or have input_dim entries");
  }
}

std::vector<int> PdaTaskSpec::sharedClasses() const {
  std::vector<int> out(static_cast<std::size_t>(targetClassCount));
  for (int c = 0; c < targetClassCount; ++c) out[static_cast<std::size_t>(c)] = c;
  return out;
}

PdaTaskSpec blobs8to4(std::uint64_t seed) {
  PdaTaskSpec spec;
  spec.seed = seed;
  return spec;
}

nn::Vector sourceCenter(const PdaTaskSpec& spec, int cls) {
  nn::Vector c = nn::Vector::Zero(spec.inputDim);
  const double angle = 2.0 * std::numbers::pi * cls / spec.sourceClassCount;
  c(0) = spec.radius * std::cos(angle);
  c(1) = spec.radius * std::sin(angle);
  return c;
}

nn::Vector applyShift(const PdaTaskSpec& spec, const nn::Vector& x) {
  const double theta = spec.rotationDeg * std::numbers::pi / 180.0;
  nn::Vector y = x;
  y(0) = std::cos(theta) * x(0) - std::sin(theta) * x(1);
  y(1) = std::sin(theta) * x(0) + std::cos(theta) * x(1);
  return spec.scale * y + translationOf(spec);
}

nn::Vector inverseShift(const PdaTaskSpec& spec, const nn::Vector& y) {
  const double theta = spec.rotationDeg * std::numbers::pi / 180.0;
  const nn::Vector u = (y - translationOf(spec)) / spec.scale;
  nn::Vector x = u;
  x(0) = std::cos(theta) * u(0) + std::sin(theta) * u(1);
  x(1) = -std::sin(theta) * u(0) + std::cos(theta) * u(1);
  return x;
}

PdaTask generateTask(const PdaTaskSpec& spec) {
  spec.validate();
  PdaTask task;
  task.spec = spec;
  const Rng root(spec.seed);
  const int n = spec.samplesPerClass;
  const int d = spec.inputDim;

  Rng sourceRng = root.fork(kSourceStream);
  task.source.classCount = spec.sourceClassCount;
  task.source.inputs.resize(static_cast<Eigen::Index>(spec.sourceClassCount) * n, d);
  task.source.labels.reserve(static_cast<std::size_t>(spec.sourceClassCount * n));
  Eigen::Index row = 0;
  for (int c = 0; c < spec.sourceClassCount; ++c) {
    const nn::Vector center = sourceCenter(spec, c);
    for (int i = 0; i < n; ++i, ++row) {
      appendSample(task.source.inputs, row, center, spec.noise, sourceRng);
      task.source.labels.push_back(c);
    }
  }

  Rng targetRng = root.fork(kTargetStream);
  const int trainPerClass = (n + 1) / 2;
  const int testPerClass = n - trainPerClass;
  task.targetTrain.inputs.resize(static_cast<Eigen::Index>(spec.targetClassCount) * trainPerClass, d);
  task.targetTest.inputs.resize(static_cast<Eigen::Index>(spec.targetClassCount) * testPerClass, d);
  task.targetTest.classCount = spec.sourceClassCount;
  Eigen::Index trainRow = 0;
  Eigen::Index testRow = 0;
  for (int c = 0; c < spec.targetClassCount; ++c) {
    const nn::Vector center = applyShift(spec, sourceCenter(spec, c));
    for (int i = 0; i < n; ++i) {
      if (i < trainPerClass) {
        appendSample(task.targetTrain.inputs, trainRow++, center, spec.noise, targetRng);
        task.targetTrainTruth.push_back(c);
      } else {
        appendSample(task.targetTest.inputs, testRow++, center, spec.noise, targetRng);
        task.targetTest.labels.push_back(c);
      }
    }
  }
  return task;
}

DomainBatch minibatch(const LabeledSet& set, std::size_t batchSize, Rng& rng, bool balanced) {
  if (set.size() == 0) throw std::invalid_argument("minibatch: empty set");
  if (batchSize == 0) throw std::invalid_argument("minibatch: batch size must be >= 1");
  DomainBatch batch;
  batch.domain = Domain::kSource;
  batch.inputs.resize(static_cast<Eigen::Index>(batchSize), set.inputs.cols());
  std::vector<int> labels;
  labels.reserve(batchSize);

  auto take = [&](std::size_t source) {
    batch.inputs.row(static_cast<Eigen::Index>(labels.size())) = set.inputs.row(static_cast<Eigen::Index>(source));
    labels.push_back(set.labels[source]);
  };

  if (!balanced) {
    for (std::size_t i = 0; i < batchSize; ++i) take(rng.below(set.size()));
  } else {
    std::vector<std::vector<std::size_t>> byClass(static_cast<std::size_t>(set.classCount));
    for (std::size_t i = 0; i < set.size(); ++i) byClass[static_cast<std::size_t>(set.labels[i])].push_back(i);
    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < byClass.size(); ++c) {
      if (!byClass[c].empty()) present.push_back(c);
    }
    const std::size_t base = batchSize / present.size();
    const std::size_t extra = batchSize % present.size();
    const std::size_t offset = extra == 0 ? 0 : rng.below(present.size());
    for (std::size_t slot = 0; slot < present.size(); ++slot) {
      const auto& members = byClass[present[slot]];
      const std::size_t rank = (slot + present.size() - offset) % present.size();
      const std::size_t count = base + (rank < extra ? 1 : 0);
      for (std::size_t i = 0; i < count; ++i) take(members[rng.below(members.size())]);
    }
  }
  batch.labels = std::move(labels);
  return batch;
}

DomainBatch minibatch(const UnlabeledSet& set, std::size_t batchSize, Rng& rng) {
  if (set.size() == 0) throw std::invalid_argument("minibatch: empty set");
  if (batchSize == 0) throw std::invalid_argument("minibatch: batch size must be >= 1");
  DomainBatch batch;
  batch.domain = Domain::kTarget;
  batch.inputs.resize(static_cast<Eigen::Index>(batchSize), set.inputs.cols());
  for (std::size_t i = 0; i < batchSize; ++i) {
    batch.inputs.row(static_cast<Eigen::Index>(i)) = set.inputs.row(static_cast<Eigen::Index>(rng.below(set.size())));
  }
  return batch;
}

void writeCsv(std::ostream& out, const PdaTask& task) {
  const Eigen::Index d = task.source.inputs.cols();
  out << "domain,class";
  for (Eigen::Index j = 0; j < d; ++j) out << ",x" << j;
  out << '\n';
  char buf[40];
  auto rows = [&](const char* domain, const nn::Matrix& inputs, const std::vector<int>& labels) {
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
      out << domain << ',' << labels[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < d; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", inputs(i, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  };
  rows("source", task.source.inputs, task.source.labels);
  rows("target_train", task.targetTrain.inputs, task.targetTrainTruth);
  rows("target_test", task.targetTest.inputs, task.targetTest.labels);
}

PdaTask readCsv(std::istream& in, const PdaTaskSpec& spec) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset csv: missing header");
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',')) - 1;
  if (line.rfind("domain,class", 0) != 0 || columns < 1) throw ConfigError("dataset csv: bad header '" + line + "'");

  std::vector<std::vector<double>> src, train, test;
  std::vector<int> srcLabels, trainLabels, testLabels;
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string domain, field;
    std::getline(ss, domain, ',');
    std::getline(ss, field, ',');
    const int label = std::stoi(field);
    std::vector<double> x;
    while (std::getline(ss, field, ',')) x.push_back(std::stod(field));
    if (static_cast<Eigen::Index>(x.size()) != columns) {
      throw ConfigError("dataset csv: wrong column count on line " + std::to_string(lineNo));
    }
    if (domain == "source") {
      src.push_back(std::move(x));
      srcLabels.push_back(label);
    } else if (domain == "target_train") {
      train.push_back(std::move(x));
      trainLabels.push_back(label);
    } else if (domain == "target_test") {
      test.push_back(std::move(x));
      testLabels.push_back(label);
    } else {
      throw ConfigError("dataset csv: unknown domain '" + domain + "' on line " + std::to_string(lineNo));
    }
  }
  auto toMatrix = [&](const std::vector<std::vector<double>>& rows) {
    nn::Matrix m(static_cast<Eigen::Index>(rows.size()), columns);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (Eigen::Index j = 0; j < columns; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    return m;
  };
  PdaTask task;
  task.spec = spec;
  task.source = {toMatrix(src), std::move(srcLabels), spec.sourceClassCount};
  task.targetTrain = {toMatrix(train)};
  task.targetTrainTruth = std::move(trainLabels);
  task.targetTest = {toMatrix(test), std::move(testLabels), spec.sourceClassCount};
  return task;
}

}  // namespace sapda::data
