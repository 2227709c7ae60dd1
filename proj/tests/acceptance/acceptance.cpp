// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "checks.hpp"
#include "sapda/errors.hpp"
#include "sapda/experiment.hpp"

using namespace sapda;
namespace fs = std::filesystem;

namespace {

constexpr int kSeedCount = 5;
constexpr double kWarmupFraction = 0.25;
constexpr double kMarginPoints = 0.05;
constexpr double kBetaSpreadPoints = 0.05;
constexpr double kOracleSeconds = 30.0;
constexpr double kSeedSeconds = 120.0;
constexpr double kInvariantSeconds = 60.0;

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Report {
  int failures = 0;

  void line(int id, const std::string& name, bool passed, const std::string& detail) {
    std::cout << (passed ? "PASS " : "FAIL ") << id << ". " << name << " -- " << detail << std::endl;
    failures += passed ? 0 : 1;
  }
};

bench::ExperimentManifest baseManifest(bench::ExperimentKind kind, const fs::path& out, int jobs) {
  bench::ExperimentManifest m;
  m.kind = kind;
  m.outputDir = out.string();
  m.seeds.clear();
  for (int s = 1; s <= kSeedCount; ++s) m.seeds.push_back(static_cast<std::uint64_t>(s));
  m.jobs = jobs;
  return m;
}

std::vector<const bench::RunOutcome*> runsOf(const bench::ExperimentResult& r, const std::string& condition) {
  std::vector<const bench::RunOutcome*> out;
  for (const bench::RunOutcome& run : r.runs) {
    if (run.condition == condition) out.push_back(&run);
  }
  return out;
}

std::string readFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void partitionOracle(Report& report) {
  const auto start = Clock::now();
  const checks::OracleReport r = checks::partitionOracleSuite(500, 1001);
  const double seconds = secondsSince(start);
  report.line(1, "partition oracle equivalence", r.passed() && seconds < kOracleSeconds,
              fmt("%zu (vector, k) checks, %zu mismatches, %.2f s (limit %.0f s)%s", r.cases, r.mismatches, seconds,
                  kOracleSeconds, r.firstFailure.empty() ? "" : ("; " + r.firstFailure).c_str()));
}

void chReference(Report& report) {
  const checks::OracleReport r = checks::chOracleSuite(200, 1002, 1e-9);
  report.line(2, "CH reference equivalence", r.passed(),
              fmt("%zu pairs, max rel err %.3g (limit 1e-9)", r.cases, r.maxRelError));
}

void gradientChecks(Report& report) {
  bool ok = true;
  std::string detail;
  for (const checks::GradCheckReport& g : checks::lossGradientSuite(1003)) {
    const bool pass = g.passed(1e-4) && g.checked >= 100;
    ok = ok && pass;
    detail += fmt("%s %zu params max %.2g; ", g.name.c_str(), g.checked, g.maxRelError);
  }
  double worstResidual = 0.0;
  for (double lambda : {0.0, 0.37, 1.0, 2.0}) {
    const checks::ReversalReport r = checks::reversalAntisymmetry(1004, lambda);
    ok = ok && r.passed;
    worstResidual = std::max(worstResidual, r.maxResidual);
  }
  detail += fmt("reversal residual %.2g", worstResidual);
  report.line(3, "gradient checks", ok, detail);
}

void weightRecovery(Report& report, const bench::ExperimentResult& ablation, double seedSeconds) {
  int recovered = 0;
  std::string perSeed;
  for (const bench::RunOutcome* run : runsOf(ablation, "sapda")) {
    const std::vector<double>& w = run->finalWeights.perClassWeight;
    bool ok = w.size() == 8;
    for (std::size_t c = 0; ok && c < w.size(); ++c) ok = w[c] == (c < 4 ? 1.0 : 0.0);
    recovered += ok ? 1 : 0;
    perSeed += fmt(" seed %llu k*=%d [", static_cast<unsigned long long>(run->seed), run->finalWeights.kStar);
    for (std::size_t c = 0; c < w.size(); ++c) perSeed += fmt(c ? " %.3g" : "%.3g", w[c]);
    perSeed += "]";
  }
  report.line(4, "weight recovery", recovered >= 4 && seedSeconds < kSeedSeconds,
              fmt("%d/5 seeds exact (need 4), %.1f s per seed (limit %.0f s);", recovered, seedSeconds,
                  kSeedSeconds) +
                  perSeed);
}

void benchmarkOrdering(Report& report, const bench::ExperimentResult& ablation) {
  const double sapda = ablation.condition("sapda").meanAccuracy;
  const double unweighted = ablation.condition("unweighted-adversarial").meanAccuracy;
  const double sourceOnly = ablation.condition("source-only").meanAccuracy;
  const double noWeightEval = ablation.condition("no-weight-eval").meanAccuracy;
  const bool ok = sapda >= unweighted + kMarginPoints && sapda >= sourceOnly + kMarginPoints && sapda >= noWeightEval;
  std::string means;
  for (const bench::ConditionSummary& c : ablation.conditions) means += fmt(" %s=%.4f", c.name.c_str(), c.meanAccuracy);
  report.line(5, "benchmark ordering", ok,
              fmt("sapda %.4f vs unweighted-adversarial %.4f, source-only %.4f (margin 0.05), no-weight-eval %.4f;",
                  sapda, unweighted, sourceOnly, noWeightEval) +
                  means);
}

void clusterCount(Report& report, const bench::ExperimentResult& ablation, const bench::ExperimentResult& standard) {
  std::size_t rows = 0;
  std::size_t outside = 0;
  for (const bench::RunOutcome* run : runsOf(ablation, "sapda")) {
    const int warmupEnd = static_cast<int>(kWarmupFraction * run->history.back().iteration);
    for (const train::RunRecordRow& row : run->history) {
      if (row.iteration <= warmupEnd) continue;
      ++rows;
      outside += row.kStar == 2 || row.kStar == 3 ? 0 : 1;
    }
  }
  int standardOnes = 0;
  std::string finals;
  for (const bench::RunOutcome& run : standard.runs) {
    standardOnes += run.finalWeights.kStar == 1 ? 1 : 0;
    finals += fmt(" %d", run.finalWeights.kStar);
  }
  report.line(6, "cluster-count dynamics", rows > 0 && outside == 0 && standardOnes >= 4,
              fmt("PDA: %zu post-warmup rows, %zu outside {2,3}; standard DA: final k*=1 in %d/5 seeds (need 4), finals",
                  rows, outside, standardOnes) +
                  finals);
}

void betaSensitivity(Report& report, const fs::path& out, int jobs) {
  try {
    const bench::ExperimentResult r = bench::runExperiment(baseManifest(bench::ExperimentKind::kBetaSweep, out, jobs));
    double lo = 1.0;
    double hi = 0.0;
    std::string means;
    for (const bench::ConditionSummary& c : r.conditions) {
      lo = std::min(lo, c.meanAccuracy);
      hi = std::max(hi, c.meanAccuracy);
      means += fmt(" %s:%.4f", c.name.c_str(), c.meanAccuracy);
    }
    report.line(7, "beta sensitivity", r.conditions.size() == 6 && hi - lo <= kBetaSpreadPoints,
                fmt("spread %.4f (limit 0.05), no divergence;", hi - lo) + means);
  } catch (const DivergenceError& e) {
    report.line(7, "beta sensitivity", false, std::string("diverged: ") + e.what());
  }
}

void determinism(Report& report, const fs::path& out, int jobs) {
  bench::ExperimentManifest m = baseManifest(bench::ExperimentKind::kSingle, out, jobs);
  m.seeds = {1, 2};
  const bench::ExperimentResult a = bench::runExperiment(m);
  const bench::ExperimentResult b = bench::runExperiment(m);
  std::size_t compared = 0;
  std::size_t differing = 0;
  auto compare = [&](const fs::path& rel) {
    ++compared;
    const std::string x = readFile(a.directory / rel);
    differing += x.empty() || x != readFile(b.directory / rel) ? 1 : 0;
  };
  for (std::uint64_t seed : m.seeds) compare(fs::path("sapda") / ("seed_" + std::to_string(seed)) / "history.csv");
  compare(fs::path("sapda") / "weights_final.json");
  report.line(8, "determinism", differing == 0,
              fmt("%zu artifacts compared across two runs, %zu differ", compared, differing));
}

void invariantSuite(Report& report) {
  const auto start = Clock::now();
  std::ostringstream lines;
  const bool ok = checks::runInvariantSuite(lines, 20240601);
  const double seconds = secondsSince(start);
  std::size_t failed = 0;
  std::size_t total = 0;
  std::istringstream text(lines.str());
  std::string line;
  std::string firstFailure;
  while (std::getline(text, line)) {
    if (line.rfind("PASS ", 0) == 0) ++total;
    if (line.rfind("FAIL ", 0) == 0) {
      ++total;
      ++failed;
      if (firstFailure.empty()) firstFailure = "; " + line;
    }
  }
  report.line(9, "invariant suite", ok && seconds < kInvariantSeconds,
              fmt("%zu/%zu checks pass in %.2f s (limit 60 s)", total - failed, total, seconds) + firstFailure);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sapda acceptance suite"};
  fs::path out = fs::temp_directory_path() / "sapda_acceptance";
  int jobs = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  app.add_option("--out", out, "directory for experiment artifacts (cleared first)");
  app.add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(out);
  fs::create_directories(out);
  Report report;

  partitionOracle(report);
  chReference(report);
  gradientChecks(report);

  const auto seedStart = Clock::now();
  const bench::ExperimentManifest ablationManifest = baseManifest(bench::ExperimentKind::kAblation, out, jobs);
  const std::vector<bench::Condition> conditions = bench::planConditions(ablationManifest);
  bench::runCondition(conditions.front(), 1);
  const double seedSeconds = secondsSince(seedStart);

  const bench::ExperimentResult ablation = bench::runExperiment(ablationManifest);
  weightRecovery(report, ablation, seedSeconds);
  benchmarkOrdering(report, ablation);

  bench::ExperimentManifest standardManifest = baseManifest(bench::ExperimentKind::kClassSweep, out, jobs);
  standardManifest.targetClassCounts = {standardManifest.task.sourceClassCount};
  const bench::ExperimentResult standard = bench::runExperiment(standardManifest);
  clusterCount(report, ablation, standard);

  betaSensitivity(report, out, jobs);
  determinism(report, out, jobs);
  invariantSuite(report);

  std::cout << (report.failures == 0 ? "acceptance: all criteria passed"
                                     : "acceptance: " + std::to_string(report.failures) + " criteria failed")
            << std::endl;
  return report.failures == 0 ? 0 : 1;
}
