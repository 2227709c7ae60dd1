#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "checks.hpp"
#include "sapda/errors.hpp"
#include "sapda/weight_eval.hpp"

using namespace sapda;
using weights::ClassWeightVector;
using weights::Partition;

namespace {

std::set<std::set<int>> groupsOf(const Partition& p) {
  std::vector<std::set<int>> groups(static_cast<std::size_t>(p.k));
  for (std::size_t j = 0; j < p.assignment.size(); ++j) groups[static_cast<std::size_t>(p.assignment[j])].insert(static_cast<int>(j));
  return {groups.begin(), groups.end()};
}

nn::Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  nn::Matrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : values) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("class weight vector validates its entries") {
  CHECK_THROWS_AS(ClassWeightVector(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(ClassWeightVector({0.5, -0.1}), std::invalid_argument);
  CHECK_THROWS_AS(ClassWeightVector({0.5, std::numeric_limits<double>::infinity()}), std::invalid_argument);
  CHECK_THROWS_AS(ClassWeightVector({0.0, 0.0}).normalized(), ContractViolation);
  const ClassWeightVector w = ClassWeightVector({0.2, 0.8, 0.4}).normalized();
  CHECK(w.max() == 1.0);
  CHECK(w[0] == doctest::Approx(0.25));
}

TEST_CASE("computeClassWeights: one-hot rows give a unit vector") {
  const ClassWeightVector w = weights::computeClassWeights(rows({{0, 0, 1, 0}, {0, 0, 1, 0}, {0, 0, 1, 0}}));
  CHECK(std::vector<double>(w.values().begin(), w.values().end()) == std::vector<double>{0, 0, 1, 0});
}

TEST_CASE("computeClassWeights: mean then max-normalize") {
  const ClassWeightVector w = weights::computeClassWeights(rows({{0.8, 0.2}, {0.4, 0.6}}));
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("computeClassWeights: uniform rows normalize to all ones") {
  const ClassWeightVector w = weights::computeClassWeights(rows({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}}));
  for (double v : w.values()) CHECK(v == 1.0);
}

TEST_CASE("computeClassWeights rejects rows off the simplex") {
  CHECK_THROWS_AS(weights::computeClassWeights(rows({{0.5, 0.6}})), ContractViolation);
  CHECK_THROWS_AS(weights::computeClassWeights(rows({{1.2, -0.2}})), ContractViolation);
  CHECK_THROWS_AS(weights::computeClassWeights(nn::Matrix(0, 3)), std::invalid_argument);
}

TEST_CASE("optimalPartition k=1 is the whole set") {
  const ClassWeightVector w({1.0, 0.4, 0.7, 0.1});
  const Partition p = weights::optimalPartition(w, 1);
  const double mean = (1.0 + 0.4 + 0.7 + 0.1) / 4.0;
  double ss = 0.0;
  for (double v : w.values()) ss += (v - mean) * (v - mean);
  CHECK(p.groupMeans[0] == doctest::Approx(mean).epsilon(1e-15));
  CHECK(p.cost == doctest::Approx(ss / 4.0).epsilon(1e-14));
  CHECK(p.groupSizes[0] == 4);
}

TEST_CASE("optimalPartition k=2 splits the high and low runs") {
  const std::vector<double> v = {1.0, 0.95, 0.9, 0.10, 0.05};
  const Partition p = weights::optimalPartition(ClassWeightVector(v), 2);
  CHECK(groupsOf(p) == std::set<std::set<int>>{{0, 1, 2}, {3, 4}});
  CHECK(p.assignment[0] == 0);
  CHECK(p.assignment[4] == 1);
  CHECK(p.cost == checks::bruteForcePartition(v, 2).cost);
}

TEST_CASE("optimalPartition k=3 pairs adjacent values") {
  const std::vector<double> v = {1.0, 0.98, 0.55, 0.5, 0.05, 0.02};
  const Partition p = weights::optimalPartition(ClassWeightVector(v), 3);
  CHECK(groupsOf(p) == std::set<std::set<int>>{{0, 1}, {2, 3}, {4, 5}});
  CHECK(p.groupMeans[0] > p.groupMeans[1]);
  CHECK(p.groupMeans[1] > p.groupMeans[2]);
  const checks::BruteForcePartition brute = checks::bruteForcePartition(v, 3);
  CHECK(p.cost == brute.cost);
  CHECK(checks::samePartition(p.assignment, brute.assignment));
}

TEST_CASE("optimalPartition argument errors") {
  const ClassWeightVector w({1.0, 0.5});
  CHECK_THROWS_AS(weights::optimalPartition(w, 3), std::invalid_argument);
  CHECK_THROWS_AS(weights::optimalPartition(ClassWeightVector({1, 0.5, 0.2, 0.1, 0}), 4), std::invalid_argument);
  CHECK_THROWS_AS(weights::optimalPartition(w, 0), std::invalid_argument);
}

TEST_CASE("equal values break ties at the lexicographically smallest cut") {
  const Partition p = weights::optimalPartition(ClassWeightVector({0.5, 0.5, 0.5, 0.5}), 2);
  CHECK(p.cost == 0.0);
  // Sorted by (value, index) the cut after the first element isolates class 0.
  CHECK(p.assignment == std::vector<int>{1, 0, 0, 0});
}

TEST_CASE("partition invariants: contiguous, ordered, cost recomputable") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(3 + rng.below(10));
    for (double& x : v) x = rng.uniform();
    const ClassWeightVector w(v);
    for (int k = 1; k <= 3; ++k) {
      const Partition p = weights::optimalPartition(w, k);
      for (std::size_t g = 0; g < p.groupSizes.size(); ++g) REQUIRE(p.groupSizes[g] > 0);
      for (int g = 0; g + 1 < k; ++g) REQUIRE(p.groupMeans[static_cast<std::size_t>(g)] > p.groupMeans[static_cast<std::size_t>(g + 1)]);
      // Contiguity: every value of a higher group exceeds every value of a lower one.
      for (std::size_t a = 0; a < v.size(); ++a) {
        for (std::size_t b = 0; b < v.size(); ++b) {
          if (p.assignment[a] < p.assignment[b]) REQUIRE(v[a] >= v[b]);
        }
      }
      double ss = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double d = v[j] - p.groupMeans[static_cast<std::size_t>(p.assignment[j])];
        ss += d * d;
      }
      REQUIRE(std::abs(p.cost - ss / static_cast<double>(v.size())) <= 1e-12);
    }
  }
}

TEST_CASE("partitionFromAssignment relabels groups by mean") {
  const std::vector<double> v = {0.1, 0.9, 0.5, 0.95};
  const Partition p = weights::partitionFromAssignment(v, {0, 1, 2, 1}, 3);
  CHECK(p.assignment == std::vector<int>{2, 0, 1, 0});
  CHECK(p.groupMeans[0] == doctest::Approx(0.925));
  CHECK_THROWS_AS(weights::partitionFromAssignment(v, {0, 0, 0, 0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(weights::partitionFromAssignment(v, {0, 3, 1, 1}, 2), std::invalid_argument);
}

TEST_CASE("chIndex: a perfect split returns the infinity sentinel") {
  const ClassWeightVector w({1, 1, 0, 0});
  const double ch = weights::chIndex(w, weights::optimalPartition(w, 2));
  CHECK(std::isinf(ch));
  CHECK(ch > 0);
}

TEST_CASE("chIndex matches the reference and the hand value on [1, 0.9, 0.1]") {
  const std::vector<double> v = {1.0, 0.9, 0.1};
  const Partition p = weights::partitionFromAssignment(v, {0, 0, 1}, 2);
  const double ch = weights::chIndex(ClassWeightVector(v), p);
  // trB = 867/5400, trS = 1/400, (n - k) = 1, (k - 1) = 1.
  CHECK(ch == doctest::Approx(578.0 / 9.0).epsilon(1e-9));
  const double ref = checks::referenceCh(v, p.assignment, 2);
  CHECK(std::abs(ch - ref) / ref < 1e-9);
}

TEST_CASE("chIndex is invariant under translation") {
  const std::vector<double> v = {1.0, 0.8, 0.45, 0.4, 0.1};
  std::vector<double> shifted = v;
  for (double& x : shifted) x += 3.25;
  for (int k = 2; k <= 3; ++k) {
    const Partition p = weights::optimalPartition(ClassWeightVector(v), k);
    const Partition q = weights::partitionFromAssignment(shifted, p.assignment, k);
    CHECK(weights::chIndex(ClassWeightVector(shifted), q) ==
          doctest::Approx(weights::chIndex(ClassWeightVector(v), p)).epsilon(1e-9));
  }
}

TEST_CASE("chIndex argument errors") {
  const ClassWeightVector w({1, 0.6, 0.2});
  CHECK_THROWS_AS(weights::chIndex(w, weights::optimalPartition(w, 1)), std::invalid_argument);
  CHECK_THROWS_AS(weights::chIndex(w, weights::optimalPartition(w, 3)), std::invalid_argument);
}

TEST_CASE("selectK: flat vectors degenerate to one group") {
  const weights::Selection s = weights::selectK(ClassWeightVector({1, 1, 1, 1, 1}));
  CHECK(s.kStar == 1);
  CHECK(weights::selectK(ClassWeightVector({1, 0.95, 0.93, 0.91})).kStar == 1);
}

TEST_CASE("selectK: bimodal picks two groups") {
  const std::vector<double> v = {1, .98, .96, .05, .03, .01};
  const weights::Selection s = weights::selectK(ClassWeightVector(v));
  CHECK(s.kStar == 2);
  CHECK(s.ch2 == doctest::Approx(checks::referenceCh(v, s.partitionFor(2).assignment, 2)).epsilon(1e-9));
  CHECK(s.ch3 == doctest::Approx(checks::referenceCh(v, s.partitionFor(3).assignment, 3)).epsilon(1e-9));
  CHECK(s.ch2 > s.ch3);
}

TEST_CASE("selectK: trimodal picks three groups") {
  const std::vector<double> v = {1, .97, .52, .48, .04, .01};
  const weights::Selection s = weights::selectK(ClassWeightVector(v));
  CHECK(s.kStar == 3);
  CHECK(s.ch3 == doctest::Approx(checks::referenceCh(v, s.partitionFor(3).assignment, 3)).epsilon(1e-9));
  CHECK(s.ch3 > s.ch2);
}

TEST_CASE("selectK: two infinite scores tie to k = 2") {
  const weights::Selection s = weights::selectK(ClassWeightVector({1, 1, 1, 0, 0, 0}));
  CHECK(std::isinf(s.ch2));
  CHECK(std::isinf(s.ch3));
  CHECK(s.kStar == 2);
}

TEST_CASE("selectK options and preconditions") {
  const ClassWeightVector bimodal({1, .98, .96, .05, .03, .01});
  CHECK(weights::selectK(bimodal, {.forcedK = 3}).kStar == 3);
  CHECK(weights::selectK(ClassWeightVector({1, 1, 1, 1}), {.forcedK = 2}).kStar == 2);
  CHECK(weights::selectK(bimodal, {.tauUniform = 2.0, .forcedK = std::nullopt}).kStar == 1);
  CHECK_THROWS_AS(weights::selectK(bimodal, {.forcedK = 1}), std::invalid_argument);
  CHECK_THROWS_AS(weights::selectK(ClassWeightVector({1, 0.5, 0})), std::invalid_argument);
}

TEST_CASE("assignWeights follows the group roles") {
  {
    const ClassWeightVector w({1.0, 0.9, 0.1, 0.05});
    const weights::WeightTable t = weights::assignWeights(w, 2, weights::optimalPartition(w, 2));
    CHECK(t.perClassWeight == std::vector<double>{1, 1, 0, 0});
  }
  {
    const ClassWeightVector w({1, .97, .52, .48, .04, .01});
    const weights::WeightTable t = weights::assignWeights(w, 3, weights::optimalPartition(w, 3));
    CHECK(t.perClassWeight[0] == 1.0);
    CHECK(t.perClassWeight[1] == 1.0);
    CHECK(t.perClassWeight[2] == doctest::Approx(0.50).epsilon(1e-15));
    CHECK(t.perClassWeight[3] == t.perClassWeight[2]);
    CHECK(t.perClassWeight[4] == 0.0);
    CHECK(t.perClassWeight[5] == 0.0);
  }
  {
    const ClassWeightVector w({1, .2, .5, .9});
    const weights::WeightTable t = weights::assignWeights(w, 1, weights::optimalPartition(w, 1));
    CHECK(t.perClassWeight == std::vector<double>{1, 1, 1, 1});
    CHECK(t.kStar == 1);
  }
  const ClassWeightVector w({1, .5, .2, 0});
  CHECK_THROWS_AS(weights::assignWeights(w, 3, weights::optimalPartition(w, 2)), std::invalid_argument);
}

TEST_CASE("evaluateWeights carries the CH scores") {
  const weights::WeightTable t = weights::evaluateWeights(ClassWeightVector({1, .97, .52, .48, .04, .01}));
  CHECK(t.kStar == 3);
  REQUIRE(t.chScores.count(2) == 1);
  REQUIRE(t.chScores.count(3) == 1);
  CHECK(t.chScores.at(3) > t.chScores.at(2));
  CHECK(t.weightFor(0) == 1.0);
  CHECK_THROWS_AS(t.weightFor(6), std::out_of_range);
}

TEST_CASE("uniform table is the pre-update state") {
  const weights::WeightTable t = weights::WeightTable::uniform(5);
  CHECK(t.kStar == 1);
  CHECK(t.perClassWeight == std::vector<double>(5, 1.0));
}

TEST_CASE("scaling the raw vector scales costs by c squared and keeps the groups") {
  const std::vector<double> v = {0.9, 0.85, 0.5, 0.45, 0.1, 0.02, 0.6};
  for (double c : {0.01, 0.3, 7.5}) {
    std::vector<double> s = v;
    for (double& x : s) x *= c;
    for (int k = 1; k <= 3; ++k) {
      const Partition a = weights::optimalPartition(ClassWeightVector(v), k);
      const Partition b = weights::optimalPartition(ClassWeightVector(s), k);
      CHECK(a.assignment == b.assignment);
      CHECK(b.cost == doctest::Approx(c * c * a.cost).epsilon(1e-12));
    }
  }
}

TEST_CASE("partition oracle agrees on 500 random vectors") {
  const checks::OracleReport r = checks::partitionOracleSuite(500, 99);
  CHECK(r.cases == 1000);
  CHECK_MESSAGE(r.passed(), r.firstFailure);
}
