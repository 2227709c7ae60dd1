#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sapda/network.hpp"

namespace sapda::checks {

// ---- independent oracles -------------------------------------------------

struct BruteForcePartition {
  double cost = 0.0;
  std::vector<int> assignment;  // group ids in first-appearance order
  std::size_t visited = 0;      // set partitions enumerated
};

/// Minimum of sum_m sum_{j in S_m} (w_j - mean_m)^2 / n over every set
/// partition of the indices into exactly k non-empty groups (restricted
/// growth strings). Group sums and squared deviations are accumulated in
/// index order.
BruteForcePartition bruteForcePartition(std::span<const double> values, int k);

/// Calinski-Harabasz score evaluated directly from explicit member lists:
/// between-group trace weighted by |S_m|/n, within-group trace scaled by 1/k.
double referenceCh(std::span<const double> values, std::span<const int> assignment, int k);

/// True when two assignments describe the same set partition.
bool samePartition(std::span<const int> a, std::span<const int> b);

struct OracleReport {
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  double maxRelError = 0.0;
  double seconds = 0.0;
  std::string firstFailure;

  bool passed() const { return cases > 0 && mismatches == 0; }
};

/// `cases` random W_c vectors with 4..10 classes; each is checked at k = 2
/// and k = 3 for exact cost equality and identical groups.
OracleReport partitionOracleSuite(std::size_t cases, std::uint64_t seed);

/// `cases` random (w, partition) pairs, k in {2, 3}; relative error of chIndex
/// against referenceCh must stay below `tolerance`.
OracleReport chOracleSuite(std::size_t cases, std::uint64_t seed, double tolerance = 1e-9);

// ---- finite differences -----------------------------------------------------

/// Runs a loss on `params`, accumulating its gradient into the gradient
/// store, and returns the scalar whose gradient was accumulated.
using Objective = std::function<double(nn::NetworkParams&)>;

struct GradCheckReport {
  std::string name;
  std::size_t checked = 0;
  double maxRelError = 0.0;
  std::size_t worstIndex = 0;
  double worstAnalytic = 0.0;
  double worstNumeric = 0.0;

  bool passed(double tolerance = 1e-4) const { return checked > 0 && maxRelError < tolerance; }
};

/// |a - n| / max(|a|, |n|, floor).
double relativeError(double analytic, double numeric, double floor = 1e-7);

/// Central differences (f(t+h) - f(t-h)) / 2h at the given flat indices,
/// compared with the gradient `analyticObjective` accumulates at the
/// unperturbed point. `numericObjective` defaults to the analytic one; pass a
/// different function when a factor is held constant on the analytic side.
GradCheckReport checkGradient(const std::string& name, nn::NetworkParams& params,
                              const Objective& analyticObjective, const std::vector<std::size_t>& indices,
                              double h = 1e-5, const Objective& numericObjective = {});

/// Every flat index of `fullNets`, plus `randomCount` distinct random indices
/// drawn from `sampledNet`.
std::vector<std::size_t> gradientIndices(const nn::NetworkParams& params, std::span<const nn::SubNet> fullNets,
                                         nn::SubNet sampledNet, std::size_t randomCount, Rng& rng);

/// Checks the classifier, domain, cluster and target-entropy losses on a
/// random small network with at least 100 parameters each.
std::vector<GradCheckReport> lossGradientSuite(std::uint64_t seed);

struct ReversalReport {
  double lambda = 0.0;
  std::size_t checked = 0;
  double maxResidual = 0.0;      // max |g_rev + lambda g_plain| / max |lambda g_plain|
  bool headsIdentical = false;   // discriminator gradients unaffected by the reversal
  bool passed = false;
};

/// Runs the domain loss with reversal(lambda) and without any reversal and
/// compares the feature-extractor gradients elementwise.
ReversalReport reversalAntisymmetry(std::uint64_t seed, double lambda);

// ---- invariant suite --------------------------------------------------------

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckLine> runInvariantChecks(std::uint64_t seed = 20240601);

/// Prints one PASS/FAIL line per check and returns true when all pass.
bool runInvariantSuite(std::ostream& out, std::uint64_t seed = 20240601);

}  // namespace sapda::checks
