#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "checks.hpp"
#include "sapda/rng.hpp"
#include "sapda/weight_eval.hpp"

namespace sapda::checks {

namespace {

double costOf(std::span<const double> values, const std::vector<int>& groupOf, int k) {
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (std::size_t j = 0; j < values.size(); ++j) {
    sums[static_cast<std::size_t>(groupOf[j])] += values[j];
    sizes[static_cast<std::size_t>(groupOf[j])] += 1.0;
  }
  double cost = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    const auto g = static_cast<std::size_t>(groupOf[j]);
    const double d = values[j] - sums[g] / sizes[g];
    cost += d * d;
  }
  return cost / static_cast<double>(values.size());
}

std::vector<double> randomWeights(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  switch (rng.below(3)) {
    case 0:
      for (double& x : v) x = rng.uniform();
      break;
    case 1: {
      const double centers[2] = {rng.uniform(0.7, 1.0), rng.uniform(0.0, 0.3)};
      for (double& x : v) x = std::clamp(centers[rng.below(2)] + 0.05 * rng.normal(), 1e-6, 2.0);
      break;
    }
    default: {
      const double centers[3] = {rng.uniform(0.8, 1.0), rng.uniform(0.35, 0.65), rng.uniform(0.0, 0.2)};
      for (double& x : v) x = std::clamp(centers[rng.below(3)] + 0.04 * rng.normal(), 1e-6, 2.0);
      break;
    }
  }
  const double peak = *std::max_element(v.begin(), v.end());
  for (double& x : v) x /= peak;
  return v;
}

std::string describe(std::span<const double> v) {
  std::ostringstream out;
  out.precision(17);
  out << '[';
  for (std::size_t j = 0; j < v.size(); ++j) out << (j ? "," : "") << v[j];
  out << ']';
  return out.str();
}

}  // namespace

BruteForcePartition bruteForcePartition(std::span<const double> values, int k) {
  const std::size_t n = values.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) throw std::invalid_argument("bruteForcePartition: bad k");
  BruteForcePartition best;
  best.cost = std::numeric_limits<double>::infinity();

  // Restricted growth strings: a[0] = 0, a[j] <= 1 + max(a[0..j-1]).
  std::vector<int> a(n, 0);
  std::vector<int> prefixMax(n, 0);
  while (true) {
    if (prefixMax[n - 1] + 1 == k) {
      ++best.visited;
      const double cost = costOf(values, a, k);
      if (cost < best.cost) {
        best.cost = cost;
        best.assignment = a;
      }
    }
    std::size_t j = n - 1;
    while (j > 0 && (a[j] == prefixMax[j - 1] + 1 || a[j] + 1 >= k)) --j;
    if (j == 0) break;
    ++a[j];
    prefixMax[j] = std::max(prefixMax[j - 1], a[j]);
    for (std::size_t r = j + 1; r < n; ++r) {
      a[r] = 0;
      prefixMax[r] = prefixMax[j];
    }
  }
  return best;
}

double referenceCh(std::span<const double> values, std::span<const int> assignment, int k) {
  const double n = static_cast<double>(values.size());
  std::vector<std::vector<double>> members(static_cast<std::size_t>(k));
  for (std::size_t j = 0; j < values.size(); ++j) members[static_cast<std::size_t>(assignment[j])].push_back(values[j]);

  double total = 0.0;
  for (double v : values) total += v;
  const double grand = total / n;

  double traceB = 0.0;
  double traceS = 0.0;
  for (const auto& group : members) {
    double s = 0.0;
    for (double v : group) s += v;
    const double t = s / static_cast<double>(group.size());
    traceB += (static_cast<double>(group.size()) / n) * (t - grand) * (t - grand);
    for (double v : group) traceS += (v - t) * (v - t);
  }
  traceS /= static_cast<double>(k);
  if (traceS == 0.0) return std::numeric_limits<double>::infinity();
  return (traceB / (k - 1)) / (traceS / (n - k));
}

bool samePartition(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

OracleReport partitionOracleSuite(std::size_t cases, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  OracleReport report;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = 4 + rng.below(7);
    const std::vector<double> values = randomWeights(rng, n);
    const weights::ClassWeightVector w(values);
    for (int k = 2; k <= 3; ++k) {
      ++report.cases;
      const weights::Partition fast = weights::optimalPartition(w, k);
      const BruteForcePartition slow = bruteForcePartition(values, k);
      const bool costEqual = fast.cost == slow.cost;
      const bool groupsEqual = samePartition(fast.assignment, slow.assignment);
      if (!costEqual || !groupsEqual) {
        ++report.mismatches;
        if (report.firstFailure.empty()) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "k=" << k << " w=" << describe(values) << " fast=" << fast.cost << " brute=" << slow.cost
              << (groupsEqual ? "" : " (groups differ)");
          report.firstFailure = msg.str();
        }
      }
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

OracleReport chOracleSuite(std::size_t cases, std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  OracleReport report;
  Rng rng(seed);
  while (report.cases < cases) {
    const std::size_t n = 4 + rng.below(7);
    const int k = 2 + static_cast<int>(rng.below(2));
    const std::vector<double> values = randomWeights(rng, n);
    std::vector<int> assignment(n);
    for (auto& g : assignment) g = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    // Force every group to be non-empty.
    for (int g = 0; g < k; ++g) assignment[static_cast<std::size_t>(g)] = g;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<int> shuffled(n);
    for (std::size_t i = 0; i < n; ++i) shuffled[perm[i]] = assignment[i];

    const weights::Partition p = weights::partitionFromAssignment(values, shuffled, k);
    const double fast = weights::chIndex(weights::ClassWeightVector(values), p);
    const double ref = referenceCh(values, shuffled, k);
    ++report.cases;
    double rel = 0.0;
    if (std::isinf(ref) || std::isinf(fast)) {
      rel = (std::isinf(ref) && std::isinf(fast)) ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      rel = std::abs(fast - ref) / std::max(std::abs(ref), std::numeric_limits<double>::min());
    }
    report.maxRelError = std::max(report.maxRelError, rel);
    if (!(rel <= tolerance)) {
      ++report.mismatches;
      if (report.firstFailure.empty()) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "k=" << k << " w=" << describe(values) << " chIndex=" << fast << " reference=" << ref;
        report.firstFailure = msg.str();
      }
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace sapda::checks
