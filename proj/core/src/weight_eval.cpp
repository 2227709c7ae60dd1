#include "sapda/weight_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sapda/errors.hpp"

namespace sapda::weights {

ClassWeightVector::ClassWeightVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("class weight vector must not be empty");
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("class weight entries must be finite and non-negative");
    }
  }
}

double ClassWeightVector::max() const { return *std::max_element(values_.begin(), values_.end()); }
double ClassWeightVector::min() const { return *std::min_element(values_.begin(), values_.end()); }

ClassWeightVector ClassWeightVector::normalized() const {
  const double peak = max();
  if (!(peak > 0.0)) throw ContractViolation("cannot normalize an all-zero class weight vector");
  std::vector<double> out(values_.size());
  for (std::size_t j = 0; j < values_.size(); ++j) out[j] = values_[j] / peak;
  return ClassWeightVector(std::move(out));
}

WeightTable WeightTable::uniform(std::size_t classCount) {
  WeightTable table;
  table.perClassWeight.assign(classCount, 1.0);
  table.kStar = 1;
  return table;
}

ClassWeightVector computeClassWeights(const nn::Matrix& classifierProbs) {
  const Eigen::Index rows = classifierProbs.rows();
  const Eigen::Index cols = classifierProbs.cols();
  if (rows == 0 || cols == 0) throw std::invalid_argument("computeClassWeights: need at least one target sample");
  std::vector<double> mean(static_cast<std::size_t>(cols), 0.0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double rowSum = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double p = classifierProbs(i, j);
      if (!(p >= 0.0)) throw ContractViolation("computeClassWeights: probability row has a negative entry");
      rowSum += p;
      mean[static_cast<std::size_t>(j)] += p;
    }
    if (std::abs(rowSum - 1.0) > 1e-6) {
      throw ContractViolation("computeClassWeights: row " + std::to_string(i) + " is not on the simplex");
    }
  }
  for (double& m : mean) m /= static_cast<double>(rows);
  return ClassWeightVector(std::move(mean)).normalized();
}

double partitionCost(std::span<const double> values, std::span<const int> assignment, int k) {
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t j = 0; j < values.size(); ++j) {
    const auto g = static_cast<std::size_t>(assignment[j]);
    sums[g] += values[j];
    ++counts[g];
  }
  std::vector<double> means(static_cast<std::size_t>(k));
  for (std::size_t g = 0; g < means.size(); ++g) means[g] = sums[g] / static_cast<double>(counts[g]);
  double cost = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double d = values[j] - means[static_cast<std::size_t>(assignment[j])];
    cost += d * d;
  }
  return cost / static_cast<double>(values.size());
}

namespace {

// Builds the partition for contiguous runs of `order` ending at `ends`
// (exclusive), relabelled so group 0 has the highest mean.
Partition buildPartition(std::span<const double> values, const std::vector<std::size_t>& order,
                         const std::vector<std::size_t>& ends) {
  const int k = static_cast<int>(ends.size());
  Partition p;
  p.k = k;
  p.assignment.assign(values.size(), 0);
  std::size_t start = 0;
  for (int run = 0; run < k; ++run) {
    // Runs are in ascending value order; the last run is the top group.
    const int group = k - 1 - run;
    for (std::size_t pos = start; pos < ends[static_cast<std::size_t>(run)]; ++pos) {
      p.assignment[order[pos]] = group;
    }
    start = ends[static_cast<std::size_t>(run)];
  }
  p.groupSizes.assign(static_cast<std::size_t>(k), 0);
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  // Means accumulate in sorted order so they do not depend on class labels.
  for (std::size_t j : order) {
    const auto g = static_cast<std::size_t>(p.assignment[j]);
    sums[g] += values[j];
    ++p.groupSizes[g];
  }
  p.groupMeans.resize(static_cast<std::size_t>(k));
  for (std::size_t g = 0; g < sums.size(); ++g) p.groupMeans[g] = sums[g] / static_cast<double>(p.groupSizes[g]);
  p.cost = partitionCost(values, p.assignment, k);
  return p;
}

}  // namespace

Partition partitionFromAssignment(std::span<const double> values, std::vector<int> assignment, int k) {
  if (k < 1) throw std::invalid_argument("partitionFromAssignment: k must be positive");
  if (assignment.size() != values.size()) {
    throw std::invalid_argument("partitionFromAssignment: assignment length differs from class count");
  }
  const auto groups = static_cast<std::size_t>(k);
  std::vector<double> sums(groups, 0.0);
  std::vector<std::size_t> sizes(groups, 0);
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (assignment[j] < 0 || assignment[j] >= k) throw std::invalid_argument("partitionFromAssignment: bad group id");
    sums[static_cast<std::size_t>(assignment[j])] += values[j];
    ++sizes[static_cast<std::size_t>(assignment[j])];
  }
  std::vector<double> means(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    if (sizes[g] == 0) throw std::invalid_argument("partitionFromAssignment: empty group");
    means[g] = sums[g] / static_cast<double>(sizes[g]);
  }
  std::vector<std::size_t> rank(groups);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  std::vector<int> relabel(groups);
  for (std::size_t r = 0; r < groups; ++r) relabel[rank[r]] = static_cast<int>(r);

  Partition p;
  p.k = k;
  p.assignment = std::move(assignment);
  for (int& g : p.assignment) g = relabel[static_cast<std::size_t>(g)];
  for (std::size_t r = 0; r < groups; ++r) {
    p.groupMeans.push_back(means[rank[r]]);
    p.groupSizes.push_back(sizes[rank[r]]);
  }
  p.cost = partitionCost(values, p.assignment, k);
  return p;
}

Partition optimalPartition(const ClassWeightVector& w, int k) {
  const std::size_t n = w.classCount();
  if (k < 1 || k > 3) throw std::invalid_argument("optimalPartition: k must be 1, 2 or 3");
  if (static_cast<std::size_t>(k) > n) {
    throw std::invalid_argument("optimalPartition: k = " + std::to_string(k) + " exceeds class count " +
                                std::to_string(n));
  }
  const auto values = w.values();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });

  if (k == 1) return buildPartition(values, order, {n});

  // Break positions b1 < b2 < n enumerate in lexicographic order; only a
  // strictly smaller cost replaces the incumbent.
  std::optional<Partition> best;
  if (k == 2) {
    for (std::size_t b1 = 1; b1 < n; ++b1) {
      Partition candidate = buildPartition(values, order, {b1, n});
      if (!best || candidate.cost < best->cost) best = std::move(candidate);
    }
  } else {
    for (std::size_t b1 = 1; b1 + 1 < n; ++b1) {
      for (std::size_t b2 = b1 + 1; b2 < n; ++b2) {
        Partition candidate = buildPartition(values, order, {b1, b2, n});
        if (!best || candidate.cost < best->cost) best = std::move(candidate);
      }
    }
  }
  return *best;
}

double chIndex(const ClassWeightVector& w, const Partition& p) {
  const std::size_t n = w.classCount();
  const int k = p.k;
  if (k < 2) throw std::invalid_argument("chIndex: undefined for k < 2");
  if (n <= static_cast<std::size_t>(k)) throw std::invalid_argument("chIndex: requires more classes than groups");
  const auto values = w.values();
  // Sums run in ascending value order so the score does not depend on labels.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (std::size_t j : order) total += values[j];
  const double grandMean = total / static_cast<double>(n);

  double traceBetween = 0.0;
  for (std::size_t g = 0; g < static_cast<std::size_t>(k); ++g) {
    const double d = p.groupMeans[g] - grandMean;
    traceBetween += static_cast<double>(p.groupSizes[g]) / static_cast<double>(n) * d * d;
  }
  double traceWithin = 0.0;
  for (std::size_t j : order) {
    const double d = values[j] - p.groupMeans[static_cast<std::size_t>(p.assignment[j])];
    traceWithin += d * d;
  }
  traceWithin /= static_cast<double>(k);
  if (traceWithin == 0.0) return std::numeric_limits<double>::infinity();
  return (traceBetween / static_cast<double>(k - 1)) / (traceWithin / static_cast<double>(n - static_cast<std::size_t>(k)));
}

Selection selectK(const ClassWeightVector& w, const SelectionOptions& options) {
  if (w.classCount() < 4) throw std::invalid_argument("selectK: requires at least 4 classes");
  if (options.forcedK && *options.forcedK != 2 && *options.forcedK != 3) {
    throw std::invalid_argument("selectK: forced k must be 2 or 3");
  }
  Selection s;
  for (int k = 1; k <= 3; ++k) s.partitions.push_back(optimalPartition(w, k));
  s.ch2 = chIndex(w, s.partitions[1]);
  s.ch3 = chIndex(w, s.partitions[2]);
  if (options.forcedK) {
    s.kStar = *options.forcedK;
  } else if (w.max() - w.min() < options.tauUniform) {
    s.kStar = 1;
  } else {
    s.kStar = s.ch3 > s.ch2 ? 3 : 2;
  }
  return s;
}

WeightTable assignWeights(const ClassWeightVector& w, int kStar, const Partition& partition) {
  if (kStar < 1 || kStar > 3) throw std::invalid_argument("assignWeights: kStar must be 1, 2 or 3");
  if (kStar != 1 && partition.k != kStar) {
    throw std::invalid_argument("assignWeights: partition group count does not match kStar");
  }
  WeightTable table;
  table.kStar = kStar;
  table.perClassWeight.assign(w.classCount(), 1.0);
  if (kStar == 1) return table;
  const double confused = kStar == 3 ? partition.groupMeans[1] : 0.0;
  for (std::size_t j = 0; j < w.classCount(); ++j) {
    const int g = partition.assignment[j];
    if (g == 0) {
      table.perClassWeight[j] = 1.0;
    } else if (g == kStar - 1) {
      table.perClassWeight[j] = 0.0;
    } else {
      table.perClassWeight[j] = confused;
    }
  }
  return table;
}

WeightTable evaluateWeights(const ClassWeightVector& w, const SelectionOptions& options) {
  const Selection s = selectK(w, options);
  WeightTable table = assignWeights(w, s.kStar, s.partitionFor(s.kStar));
  table.chScores = {{2, s.ch2}, {3, s.ch3}};
  return table;
}

}  // namespace sapda::weights
