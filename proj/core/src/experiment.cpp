#include "sapda/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sapda/errors.hpp"

namespace sapda::bench {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json number9(double value) {
  if (!std::isfinite(value)) return format9(value);
  return round9(value);
}

ordered_json array9(const std::vector<double>& values) {
  ordered_json out = ordered_json::array();
  for (double v : values) out.push_back(number9(v));
  return out;
}

std::string shortDouble(double v) {
  std::string s = format9(v);
  return s;
}

}  // namespace

const ConditionSummary& ExperimentResult::condition(std::string_view name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no condition named " + std::string(name));
}

double round9(double value) {
  if (!std::isfinite(value)) return value;
  return std::stod(format9(value));
}

std::string format9(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::vector<Condition> planConditions(const ExperimentManifest& manifest) {
  std::vector<Condition> out;
  const Condition base{std::string(train::modeName(manifest.train.mode)),
                       std::string(train::modeName(manifest.train.mode)), manifest.task, manifest.train};
  switch (manifest.kind) {
    case ExperimentKind::kSingle:
      out.push_back(base);
      break;
    case ExperimentKind::kAblation:
      for (train::Mode mode : manifest.modes) {
        Condition c = base;
        c.name = c.dirName = std::string(train::modeName(mode));
        c.config.mode = mode;
        out.push_back(c);
      }
      break;
    case ExperimentKind::kBetaSweep:
      for (double beta : manifest.betas) {
        Condition c = base;
        c.name = "beta=" + shortDouble(beta);
        c.dirName = "beta_" + shortDouble(beta);
        c.config.beta = beta;
        out.push_back(c);
      }
      break;
    case ExperimentKind::kClassSweep:
      for (int count : manifest.targetClassCounts) {
        Condition c = base;
        c.name = "target_classes=" + std::to_string(count);
        c.dirName = "target_classes_" + std::to_string(count);
        c.task.targetClassCount = count;
        out.push_back(c);
      }
      break;
  }
  return out;
}

RunOutcome runCondition(const Condition& condition, std::uint64_t seed) {
  data::PdaTaskSpec spec = condition.task;
  spec.seed = seed;
  train::TrainConfig config = condition.config;
  config.seed = seed;
  const data::PdaTask task = data::generateTask(spec);
  train::TrainResult result = train::train(task, config);
  RunOutcome out;
  out.condition = condition.name;
  out.seed = seed;
  out.history = std::move(result.history);
  out.finalWeights = std::move(result.finalWeights);
  out.finalClassWeights.assign(result.finalClassWeights.values().begin(), result.finalClassWeights.values().end());
  out.finalAccuracy = result.finalAccuracy;
  return out;
}

ConditionSummary summarize(const std::string& name, const std::vector<const RunOutcome*>& runs) {
  ConditionSummary s;
  s.name = name;
  for (const RunOutcome* run : runs) {
    s.seeds.push_back(run->seed);
    s.accuracies.push_back(round9(run->finalAccuracy));
    s.finalKStar.push_back(run->history.back().kStar);
  }
  const double n = static_cast<double>(s.accuracies.size());
  double sum = 0.0;
  for (double a : s.accuracies) sum += a;
  s.meanAccuracy = sum / n;
  if (s.accuracies.size() > 1) {
    double sq = 0.0;
    for (double a : s.accuracies) sq += (a - s.meanAccuracy) * (a - s.meanAccuracy);
    s.stdAccuracy = std::sqrt(sq / (n - 1.0));
  }
  return s;
}

void writeHistoryCsv(std::ostream& out, const std::vector<train::RunRecordRow>& history) {
  const std::size_t classes = history.empty() ? 0 : history.front().classWeights.size();
  out << "iteration,L_c,L_d,L_cl,total,target_acc,k_star,ch2,ch3,clamp_count";
  for (std::size_t j = 0; j < classes; ++j) out << ",wc_" << j;
  for (std::size_t j = 0; j < classes; ++j) out << ",w_" << j;
  out << '\n';
  for (const auto& row : history) {
    out << row.iteration << ',' << format9(row.classifierLoss) << ',' << format9(row.domainLoss) << ','
        << format9(row.clusterLoss) << ',' << format9(row.totalLoss) << ',' << format9(row.targetAccuracy) << ','
        << row.kStar << ',' << format9(row.ch2) << ',' << format9(row.ch3) << ',' << row.clampCount;
    for (double v : row.classWeights) out << ',' << format9(v);
    for (double v : row.weights) out << ',' << format9(v);
    out << '\n';
  }
}

std::string weightsFinalJson(const std::string& condition, const std::vector<const RunOutcome*>& runs) {
  ordered_json doc;
  doc["condition"] = condition;
  ordered_json list = ordered_json::array();
  for (const RunOutcome* run : runs) {
    const train::RunRecordRow& last = run->history.back();
    ordered_json entry;
    entry["seed"] = run->seed;
    entry["iteration"] = last.iteration;
    entry["kStar"] = last.kStar;
    entry["ch2"] = number9(last.ch2);
    entry["ch3"] = number9(last.ch3);
    entry["wc"] = array9(last.classWeights);
    entry["weights"] = array9(last.weights);
    entry["accuracy"] = number9(last.targetAccuracy);
    list.push_back(std::move(entry));
  }
  doc["runs"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::string summaryJson(const ExperimentManifest& manifest, const std::vector<ConditionSummary>& conditions) {
  ordered_json doc;
  doc["kind"] = std::string(kindName(manifest.kind));
  doc["seeds"] = manifest.seeds;
  ordered_json list = ordered_json::array();
  for (const auto& c : conditions) {
    ordered_json entry;
    entry["condition"] = c.name;
    entry["mean_accuracy"] = number9(c.meanAccuracy);
    entry["std_accuracy"] = number9(c.stdAccuracy);
    entry["accuracies"] = array9(c.accuracies);
    entry["final_kstar"] = c.finalKStar;
    list.push_back(std::move(entry));
  }
  doc["conditions"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::string summaryCsv(const ExperimentManifest& manifest, const std::vector<ConditionSummary>& conditions) {
  std::ostringstream out;
  out << "condition,mean_accuracy,std_accuracy";
  for (std::uint64_t seed : manifest.seeds) out << ",seed_" << seed;
  out << '\n';
  for (const auto& c : conditions) {
    out << c.name << ',' << format9(c.meanAccuracy) << ',' << format9(c.stdAccuracy);
    for (double a : c.accuracies) out << ',' << format9(a);
    out << '\n';
  }
  return out.str();
}

void writeFileAtomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path makeRunDirectory(const ExperimentManifest& manifest) {
  const fs::path root(manifest.outputDir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw ConfigError("output directory " + root.string() + " cannot be created: " + ec.message());

  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(manifestHash(manifest)));
  const std::string stem = std::string(kindName(manifest.kind)) + "-" + stamp + "-" + std::string(hash, 8);

  for (int attempt = 0; attempt < 1000; ++attempt) {
    fs::path dir = root / (attempt == 0 ? stem : stem + "-" + std::to_string(attempt));
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw ConfigError("output directory " + dir.string() + " cannot be created: " + ec.message());
  }
  throw ConfigError("could not allocate a unique run directory under " + root.string());
}

ExperimentResult runExperiment(const ExperimentManifest& manifest, std::ostream* log) {
  manifest.validate();
  ExperimentResult result;
  result.directory = makeRunDirectory(manifest);
  try {
    writeFileAtomic(result.directory / "manifest.cfg", serialize(manifest));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("output directory is not writable: ") + e.what());
  }

  const std::vector<Condition> conditions = planConditions(manifest);
  struct Job {
    std::size_t condition;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    for (std::uint64_t seed : manifest.seeds) jobs.push_back({c, seed});
  }

  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex logMutex;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Condition& cond = conditions[jobs[j].condition];
      try {
        outcomes[j] = runCondition(cond, jobs[j].seed);
        const fs::path runDir = result.directory / cond.dirName / ("seed_" + std::to_string(jobs[j].seed));
        fs::create_directories(runDir);
        std::ostringstream csv;
        writeHistoryCsv(csv, outcomes[j].history);
        writeFileAtomic(runDir / "history.csv", csv.str());
        if (manifest.dumpData) {
          data::PdaTaskSpec spec = cond.task;
          spec.seed = jobs[j].seed;
          std::ostringstream dump;
          data::writeCsv(dump, data::generateTask(spec));
          writeFileAtomic(runDir / "dataset.csv", dump.str());
        }
        if (log != nullptr) {
          std::lock_guard lock(logMutex);
          *log << cond.name << " seed " << jobs[j].seed << ": accuracy " << format9(outcomes[j].finalAccuracy)
               << ", k* " << outcomes[j].history.back().kStar << '\n';
        }
      } catch (...) {
        std::lock_guard lock(logMutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(manifest.jobs), jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t c = 0; c < conditions.size(); ++c) {
    std::vector<const RunOutcome*> runs;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].condition == c) runs.push_back(&outcomes[j]);
    }
    const fs::path condDir = result.directory / conditions[c].dirName;
    writeFileAtomic(condDir / "weights_final.json", weightsFinalJson(conditions[c].name, runs));
    result.conditions.push_back(summarize(conditions[c].name, runs));
  }
  writeFileAtomic(result.directory / "summary.json", summaryJson(manifest, result.conditions));
  writeFileAtomic(result.directory / "summary.csv", summaryCsv(manifest, result.conditions));
  result.runs = std::move(outcomes);
  return result;
}

}  // namespace sapda::bench
