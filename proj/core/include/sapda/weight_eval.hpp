#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sapda/network.hpp"

namespace sapda::weights {

/// Per-class evidence of shared-ness: the mean classifier output over all
/// target samples, max-normalized so the largest entry is exactly 1.
class ClassWeightVector {
 public:
  ClassWeightVector() = default;
  /// Takes values as given (no normalization). Throws std::invalid_argument on
  /// empty input or negative/non-finite entries.
  explicit ClassWeightVector(std::vector<double> values);

  std::size_t classCount() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }
  double max() const;
  double min() const;

  /// Returns a copy divided by its maximum entry.
  ClassWeightVector normalized() const;

 private:
  std::vector<double> values_;
};

/// Assignment of classes to k groups. Group 0 has the highest mean (shared
/// candidate), group k-1 the lowest.
struct Partition {
  int k = 1;
  std::vector<int> assignment;         // class index -> group id in [0, k)
  std::vector<double> groupMeans;      // alpha per group, strictly ordered high to low
  std::vector<std::size_t> groupSizes;
  double cost = 0.0;                   // sum_m sum_{j in S_m} (w_j - alpha_m)^2 / |C_s|
};

struct WeightTable {
  std::vector<double> perClassWeight;
  int kStar = 1;
  /// CH(k) for each evaluated k >= 2; +infinity when the partition is exact.
  std::map<int, double> chScores;

  double weightFor(int label) const { return perClassWeight.at(static_cast<std::size_t>(label)); }
  /// All ones, kStar = 1: the state before any weight evaluation has run.
  static WeightTable uniform(std::size_t classCount);
};

inline constexpr double kDefaultTauUniform = 0.1;

/// Per-class mean of the simplex rows, max-normalized.
ClassWeightVector computeClassWeights(const nn::Matrix& classifierProbs);

/// Total within-group squared deviation scaled by 1/|C_s|, with group means
/// and sums accumulated in class-index order.
double partitionCost(std::span<const double> values, std::span<const int> assignment, int k);

/// Partition for an arbitrary assignment with every group non-empty, group
/// ids relabelled so means run high to low. Throws std::invalid_argument on
/// an empty group or an id outside [0, k).
Partition partitionFromAssignment(std::span<const double> values, std::vector<int> assignment, int k);

/// Exact minimizer of the partition cost over all assignments to k non-empty
/// groups, found by scanning contiguous break points of the values sorted by
/// (value, class index). Ties keep the lexicographically smallest breaks.
Partition optimalPartition(const ClassWeightVector& w, int k);

/// Calinski-Harabasz score for k >= 2 groups:
///   (trB / (k-1)) / (trS / (|C_s| - k))
/// with trB = sum_m |S_m|/|C_s| (alpha_m - mean)^2 and
///      trS = (1/k) sum_m sum_{j in S_m} (w_j - alpha_m)^2.
/// Returns +infinity when trS is zero.
double chIndex(const ClassWeightVector& w, const Partition& p);

struct SelectionOptions {
  double tauUniform = kDefaultTauUniform;
  /// Skip the CH comparison and always use this k (2 or 3).
  std::optional<int> forcedK;
};

struct Selection {
  int kStar = 1;
  std::vector<Partition> partitions;  // partitions[k - 1] for k = 1, 2, 3
  double ch2 = std::numeric_limits<double>::quiet_NaN();
  double ch3 = std::numeric_limits<double>::quiet_NaN();

  const Partition& partitionFor(int k) const { return partitions.at(static_cast<std::size_t>(k - 1)); }
};

/// Chooses k* in {1, 2, 3}. A spread max - min below tauUniform means no
/// outlier group is detectable (k* = 1); otherwise the larger CH wins, ties
/// going to k = 2. Requires at least 4 classes.
Selection selectK(const ClassWeightVector& w, const SelectionOptions& options = {});

/// Highest-mean group -> 1, lowest -> 0, the middle group of a 3-way split ->
/// its mean W_c value. k* = 1 gives all ones.
WeightTable assignWeights(const ClassWeightVector& w, int kStar, const Partition& partition);

/// selectK followed by assignWeights, carrying the CH scores into the table.
WeightTable evaluateWeights(const ClassWeightVector& w, const SelectionOptions& options = {});

}  // namespace sapda::weights
