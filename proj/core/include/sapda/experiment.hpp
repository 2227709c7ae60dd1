#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sapda/manifest.hpp"
#include "sapda/trainer.hpp"

namespace sapda::bench {

/// One experimental condition: a task template and a training config, run
/// once per manifest seed.
struct Condition {
  std::string name;     // e.g. "sapda", "beta=0.1", "target_classes=4"
  std::string dirName;  // filesystem-safe form of name
  data::PdaTaskSpec task;
  train::TrainConfig config;
};

std::vector<Condition> planConditions(const ExperimentManifest& manifest);

struct RunOutcome {
  std::string condition;
  std::uint64_t seed = 0;
  std::vector<train::RunRecordRow> history;
  weights::WeightTable finalWeights;
  std::vector<double> finalClassWeights;
  double finalAccuracy = 0.0;
};

struct ConditionSummary {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;  // final accuracy per seed, as written to history.csv
  std::vector<int> finalKStar;
  double meanAccuracy = 0.0;
  double stdAccuracy = 0.0;  // sample standard deviation, 0 for a single seed
};

struct ExperimentResult {
  std::filesystem::path directory;
  std::vector<ConditionSummary> conditions;
  std::vector<RunOutcome> runs;

  const ConditionSummary& condition(std::string_view name) const;
};

/// Rounds to 9 significant digits, the precision used in every artifact.
double round9(double value);
/// "%.9g" with inf/nan spelled "inf", "-inf", "nan".
std::string format9(double value);

/// Runs one (condition, seed) pair in isolation.
RunOutcome runCondition(const Condition& condition, std::uint64_t seed);

ConditionSummary summarize(const std::string& name, const std::vector<const RunOutcome*>& runs);

/// history.csv: iteration, L_c, L_d, L_cl, total, target_acc, k_star, ch2,
/// ch3, clamp_count, wc_0.., w_0..
void writeHistoryCsv(std::ostream& out, const std::vector<train::RunRecordRow>& history);
/// weights_final.json for one condition.
std::string weightsFinalJson(const std::string& condition, const std::vector<const RunOutcome*>& runs);
/// summary.json for the whole experiment.
std::string summaryJson(const ExperimentManifest& manifest, const std::vector<ConditionSummary>& conditions);
/// summary.csv: condition, mean, std, then one accuracy column per seed.
std::string summaryCsv(const ExperimentManifest& manifest, const std::vector<ConditionSummary>& conditions);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void writeFileAtomic(const std::filesystem::path& path, const std::string& contents);

/// Unique directory <out>/<kind>-<UTC timestamp>-<hash>; created on return.
std::filesystem::path makeRunDirectory(const ExperimentManifest& manifest);

/// Creates the run directory (failing before any training if it is not
/// writable), echoes the resolved manifest, runs every condition and seed
/// (up to manifest.jobs in parallel), and writes per-run history.csv,
/// per-condition weights_final.json, and summary.json / summary.csv.
ExperimentResult runExperiment(const ExperimentManifest& manifest, std::ostream* log = nullptr);

}  // namespace sapda::bench
