#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <vector>

#include "sapda/data.hpp"
#include "sapda/errors.hpp"

using namespace sapda;
using data::PdaTaskSpec;
using nn::Matrix;
using nn::Vector;

namespace {

// Class means estimated from the samples, then every sample classified by the
// nearest mean.
double nearestCentroidAccuracy(const Matrix& x, const std::vector<int>& labels, int classes) {
  Matrix means = Matrix::Zero(classes, x.cols());
  std::vector<int> counts(static_cast<std::size_t>(classes), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    means.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
    ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  }
  for (int c = 0; c < classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) means.row(c) /= counts[static_cast<std::size_t>(c)];
  }
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = -1;
    double bestDist = 0.0;
    for (int c = 0; c < classes; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      const double d = (x.row(i) - means.row(c)).squaredNorm();
      if (best < 0 || d < bestDist) {
        best = c;
        bestDist = d;
      }
    }
    correct += best == labels[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("blobs8to4 defaults") {
  const PdaTaskSpec s = data::blobs8to4();
  CHECK(s.sourceClassCount == 8);
  CHECK(s.targetClassCount == 4);
  CHECK(s.samplesPerClass == 200);
  CHECK(s.inputDim == 2);
  CHECK(s.radius == 4.0);
  CHECK(s.noise == 0.45);
  CHECK(s.rotationDeg == 30.0);
  CHECK(s.scale == 1.1);
  CHECK(s.translation.empty());
  CHECK(s.sharedClasses() == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("spec validation names the violated constraint") {
  auto invalid = [](auto mutate) {
    PdaTaskSpec s = data::blobs8to4();
    mutate(s);
    return s;
  };
  CHECK_THROWS_AS(invalid([](PdaTaskSpec& s) { s.targetClassCount = 9; }).validate(), ConfigError);
  CHECK_THROWS_AS(invalid([](PdaTaskSpec& s) { s.targetClassCount = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(invalid([](PdaTaskSpec& s) { s.noise = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(invalid([](PdaTaskSpec& s) { s.samplesPerClass = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(invalid([](PdaTaskSpec& s) { s.inputDim = 1; }).validate(), ConfigError);
  CHECK_THROWS_AS(invalid([](PdaTaskSpec& s) { s.translation = {1.0}; }).validate(), ConfigError);
  CHECK_THROWS_AS(data::generateTask(invalid([](PdaTaskSpec& s) { s.scale = 0.0; })), ConfigError);
}

TEST_CASE("source centers sit on the circle") {
  PdaTaskSpec s = data::blobs8to4();
  s.inputDim = 4;
  for (int c = 0; c < 8; ++c) {
    const Vector center = data::sourceCenter(s, c);
    const double angle = 2.0 * std::numbers::pi * c / 8.0;
    CHECK(center(0) == doctest::Approx(4.0 * std::cos(angle)));
    CHECK(center(1) == doctest::Approx(4.0 * std::sin(angle)));
    CHECK(center(2) == 0.0);
    CHECK(center(3) == 0.0);
  }
}

TEST_CASE("identity shift keeps target blobs on the source blobs") {
  PdaTaskSpec s = data::blobs8to4();
  s.rotationDeg = 0.0;
  s.scale = 1.0;
  for (int c = 0; c < 4; ++c) {
    const Vector center = data::sourceCenter(s, c);
    CHECK((data::applyShift(s, center) - center).norm() == 0.0);
  }
  const data::PdaTask task = data::generateTask(s);
  for (int c = 0; c < 4; ++c) {
    Vector mean = Vector::Zero(2);
    int n = 0;
    for (std::size_t i = 0; i < task.targetTest.size(); ++i) {
      if (task.targetTest.labels[i] != c) continue;
      mean += task.targetTest.inputs.row(static_cast<Eigen::Index>(i)).transpose();
      ++n;
    }
    mean /= n;
    // 100 samples with sigma 0.45: the mean lies within 5 standard errors.
    CHECK((mean - data::sourceCenter(s, c)).norm() < 5.0 * 0.45 / std::sqrt(100.0) * std::sqrt(2.0));
  }
}

TEST_CASE("inverse shift recovers the source centers") {
  PdaTaskSpec s = data::blobs8to4();
  s.inputDim = 3;
  s.translation = {1.5, -0.25, 3.0};
  for (int c = 0; c < 4; ++c) {
    const Vector center = data::sourceCenter(s, c);
    CHECK((data::inverseShift(s, data::applyShift(s, center)) - center).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("shift is rotation in the first plane, then scale, then translation") {
  PdaTaskSpec s = data::blobs8to4();
  s.rotationDeg = 90.0;
  s.scale = 2.0;
  s.translation = {1.0, 0.0};
  Vector x(2);
  x << 1.0, 0.0;
  const Vector y = data::applyShift(s, x);
  CHECK(y(0) == doctest::Approx(1.0));
  CHECK(y(1) == doctest::Approx(2.0));
}

TEST_CASE("generated task sizes, labels and split") {
  const data::PdaTask task = data::generateTask(data::blobs8to4(3));
  CHECK(task.source.size() == 1600);
  CHECK(task.source.classCount == 8);
  CHECK(task.targetTrain.size() == 400);
  CHECK(task.targetTest.size() == 400);
  CHECK(task.targetTrainTruth.size() == 400);
  std::set<int> targetLabels(task.targetTest.labels.begin(), task.targetTest.labels.end());
  CHECK(targetLabels == std::set<int>{0, 1, 2, 3});
  // Train and test rows are distinct samples.
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (Eigen::Index j = 0; j < task.targetTest.inputs.rows(); ++j) {
      REQUIRE(task.targetTrain.inputs.row(i) != task.targetTest.inputs.row(j));
    }
  }
}

TEST_CASE("odd sample counts put the extra sample in the training split") {
  PdaTaskSpec s = data::blobs8to4();
  s.samplesPerClass = 5;
  const data::PdaTask task = data::generateTask(s);
  CHECK(task.targetTrain.size() == 12);
  CHECK(task.targetTest.size() == 8);
}

TEST_CASE("generation is a pure function of the spec") {
  const data::PdaTask a = data::generateTask(data::blobs8to4(5));
  const data::PdaTask b = data::generateTask(data::blobs8to4(5));
  const data::PdaTask c = data::generateTask(data::blobs8to4(6));
  CHECK(a.source.inputs == b.source.inputs);
  CHECK(a.targetTrain.inputs == b.targetTrain.inputs);
  CHECK(a.targetTest.inputs == b.targetTest.inputs);
  CHECK(a.source.inputs != c.source.inputs);
}

TEST_CASE("blobs8to4 classes are separable within each domain") {
  const data::PdaTask task = data::generateTask(data::blobs8to4(1));
  CHECK(nearestCentroidAccuracy(task.source.inputs, task.source.labels, 8) > 0.99);
  CHECK(nearestCentroidAccuracy(task.targetTest.inputs, task.targetTest.labels, 4) > 0.99);
  CHECK(nearestCentroidAccuracy(task.targetTrain.inputs, task.targetTrainTruth, 4) > 0.99);
}

TEST_CASE("minibatch errors and determinism") {
  const data::PdaTask task = data::generateTask(data::blobs8to4(2));
  Rng rng(10);
  CHECK_THROWS_AS(data::minibatch(data::LabeledSet{}, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(data::minibatch(task.source, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(data::minibatch(data::UnlabeledSet{}, 4, rng), std::invalid_argument);

  Rng a(77), b(77);
  const data::DomainBatch ba = data::minibatch(task.source, 32, a);
  const data::DomainBatch bb = data::minibatch(task.source, 32, b);
  CHECK(ba.inputs == bb.inputs);
  CHECK(*ba.labels == *bb.labels);
  CHECK(a == b);
  CHECK(a.counter() > 0);

  Rng t(5);
  const data::DomainBatch target = data::minibatch(task.targetTrain, 16, t);
  CHECK_FALSE(target.labels.has_value());
  CHECK(target.domain == data::Domain::kTarget);
  CHECK(target.inputs.rows() == 16);
}

TEST_CASE("balanced minibatch over the whole set has exact class counts") {
  const data::PdaTask task = data::generateTask(data::blobs8to4(4));
  Rng rng(3);
  const data::DomainBatch batch = data::minibatch(task.source, task.source.size(), rng, true);
  std::vector<int> counts(8, 0);
  for (int y : *batch.labels) ++counts[static_cast<std::size_t>(y)];
  CHECK(counts == std::vector<int>(8, 200));
}

TEST_CASE("uniform minibatch class frequencies stay within three sigma") {
  const data::PdaTask task = data::generateTask(data::blobs8to4(4));
  Rng rng(8);
  const int draws = 10000;
  std::vector<int> counts(8, 0);
  for (int done = 0; done < draws; done += 100) {
    const data::DomainBatch batch = data::minibatch(task.source, 100, rng);
    for (int y : *batch.labels) ++counts[static_cast<std::size_t>(y)];
  }
  const double p = 1.0 / 8.0;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (int c : counts) CHECK(std::abs(c - draws * p) <= 3.0 * sigma);
}

TEST_CASE("csv dump round-trips exactly") {
  PdaTaskSpec s = data::blobs8to4(9);
  s.samplesPerClass = 7;
  const data::PdaTask task = data::generateTask(s);
  std::stringstream csv;
  data::writeCsv(csv, task);
  const std::string text = csv.str();
  CHECK(text.rfind("domain,class,x0,x1\n", 0) == 0);
  const data::PdaTask back = data::readCsv(csv, s);
  CHECK(back.source.inputs == task.source.inputs);
  CHECK(back.source.labels == task.source.labels);
  CHECK(back.targetTrain.inputs == task.targetTrain.inputs);
  CHECK(back.targetTrainTruth == task.targetTrainTruth);
  CHECK(back.targetTest.inputs == task.targetTest.inputs);
  CHECK(back.targetTest.labels == task.targetTest.labels);
}
