#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sapda/errors.hpp"
#include "sapda/experiment.hpp"

using namespace sapda;
using bench::ExperimentKind;
using bench::ExperimentManifest;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sapda_experiment_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentManifest tinyManifest(ExperimentKind kind, const fs::path& out) {
  ExperimentManifest m;
  m.kind = kind;
  m.outputDir = out.string();
  m.seeds = {1, 2};
  m.task.samplesPerClass = 16;
  m.train.totalIterations = 40;
  m.train.updateInterval = 10;
  m.train.batchSize = 8;
  m.train.hiddenWidth = 8;
  m.train.featureDim = 4;
  return m;
}

std::string readFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::vector<std::vector<std::string>> readCsv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream s(line);
    std::string f;
    while (std::getline(s, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

std::vector<fs::path> filesUnder(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("condition planning") {
  ExperimentManifest m;
  m.kind = ExperimentKind::kAblation;
  const auto ablation = bench::planConditions(m);
  REQUIRE(ablation.size() == 7);
  CHECK(ablation[0].name == "sapda");
  CHECK(ablation[6].config.mode == train::Mode::kSourceOnly);

  m.kind = ExperimentKind::kBetaSweep;
  const auto betas = bench::planConditions(m);
  REQUIRE(betas.size() == 6);
  CHECK(betas[0].name == "beta=0.01");
  CHECK(betas[0].config.beta == 0.01);
  CHECK(betas[0].dirName.find('=') == std::string::npos);

  m.kind = ExperimentKind::kClassSweep;
  const auto classes = bench::planConditions(m);
  REQUIRE(classes.size() == 4);
  CHECK(classes[1].name == "target_classes=4");
  CHECK(classes[3].task.targetClassCount == 8);

  m.kind = ExperimentKind::kSingle;
  m.train.mode = train::Mode::kNoWeightEval;
  const auto single = bench::planConditions(m);
  REQUIRE(single.size() == 1);
  CHECK(single[0].name == "no-weight-eval");
}

TEST_CASE("format9 and round9") {
  CHECK(bench::format9(0.1234567891234) == "0.123456789");
  CHECK(bench::format9(INFINITY) == "inf");
  CHECK(bench::format9(-INFINITY) == "-inf");
  CHECK(bench::format9(NAN) == "nan");
  CHECK(bench::round9(2.0 / 3.0) == std::stod("0.666666667"));
}

TEST_CASE("ablation writes one directory per mode and a recomputable summary") {
  const fs::path out = scratchDir("ablation");
  ExperimentManifest m = tinyManifest(ExperimentKind::kAblation, out);
  m.jobs = 2;
  const bench::ExperimentResult r = bench::runExperiment(m);
  CHECK(r.conditions.size() == 7);
  CHECK(r.runs.size() == 14);
  CHECK(fs::exists(r.directory / "manifest.cfg"));
  CHECK(bench::parseManifest(readFile(r.directory / "manifest.cfg")).seeds == m.seeds);

  const nlohmann::json summary = nlohmann::json::parse(readFile(r.directory / "summary.json"));
  REQUIRE(summary["conditions"].size() == 7);
  for (const auto& cond : summary["conditions"]) {
    const std::string name = cond["condition"];
    REQUIRE(fs::is_directory(r.directory / name));
    CHECK(fs::exists(r.directory / name / "weights_final.json"));
    std::vector<double> accs;
    for (std::uint64_t seed : m.seeds) {
      const auto rows = readCsv(r.directory / name / ("seed_" + std::to_string(seed)) / "history.csv");
      REQUIRE(rows.size() == 5);
      CHECK(rows[0][0] == "iteration");
      CHECK(rows[0][5] == "target_acc");
      accs.push_back(std::stod(rows.back()[5]));
    }
    const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    const double var = ((accs[0] - mean) * (accs[0] - mean) + (accs[1] - mean) * (accs[1] - mean)) / 1.0;
    CHECK(cond["mean_accuracy"].get<double>() == doctest::Approx(mean).epsilon(1e-8));
    CHECK(cond["std_accuracy"].get<double>() == doctest::Approx(std::sqrt(var)).epsilon(1e-8));
  }
  const auto csv = readCsv(r.directory / "summary.csv");
  REQUIRE(csv.size() == 8);
  CHECK(csv[0] == std::vector<std::string>{"condition", "mean_accuracy", "std_accuracy", "seed_1", "seed_2"});
  fs::remove_all(out);
}

TEST_CASE("sweeps produce one summary row per value") {
  const fs::path out = scratchDir("sweeps");
  ExperimentManifest beta = tinyManifest(ExperimentKind::kBetaSweep, out);
  beta.seeds = {1};
  const bench::ExperimentResult rb = bench::runExperiment(beta);
  CHECK(readCsv(rb.directory / "summary.csv").size() == 7);
  CHECK(rb.condition("beta=0.5").accuracies.size() == 1);

  ExperimentManifest classes = tinyManifest(ExperimentKind::kClassSweep, out);
  classes.seeds = {1};
  const bench::ExperimentResult rc = bench::runExperiment(classes);
  CHECK(readCsv(rc.directory / "summary.csv").size() == 5);
  CHECK(rc.directory != rb.directory);
  CHECK_THROWS(rc.condition("target_classes=3"));
  fs::remove_all(out);
}

TEST_CASE("identical manifests give byte-identical artifacts") {
  const fs::path out = scratchDir("determinism");
  ExperimentManifest m = tinyManifest(ExperimentKind::kSingle, out);
  m.dumpData = true;
  const bench::ExperimentResult a = bench::runExperiment(m);
  m.jobs = 2;
  const bench::ExperimentResult b = bench::runExperiment(m);
  REQUIRE(a.directory != b.directory);
  const auto files = filesUnder(a.directory);
  REQUIRE(files == filesUnder(b.directory));
  for (const fs::path& f : files) {
    if (f == "manifest.cfg") continue;
    CHECK_MESSAGE(readFile(a.directory / f) == readFile(b.directory / f), f.string());
  }
  CHECK(fs::exists(a.directory / "sapda" / "seed_1" / "dataset.csv"));
  fs::remove_all(out);
}

TEST_CASE("unwritable output directory aborts before training") {
  const fs::path out = scratchDir("unwritable");
  const fs::path blocker = out / "file";
  std::ofstream(blocker) << "x";
  const ExperimentManifest m = tinyManifest(ExperimentKind::kAblation, blocker / "runs");
  CHECK_THROWS_AS(bench::runExperiment(m), ConfigError);
  fs::remove_all(out);
}
