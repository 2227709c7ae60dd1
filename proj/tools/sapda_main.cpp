#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "checks/checks.hpp"
#include "sapda/errors.hpp"
#include "sapda/experiment.hpp"
#include "sapda/manifest.hpp"

extern char** environ;

namespace {

using sapda::bench::ExperimentKind;

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDiverged = 3 };

struct RunFlags {
  std::string config;
  std::string seed;
  std::string out;
  std::string iters;
  std::string interval;
  std::string beta;
  std::string mode;
  std::string jobs;
  std::vector<std::string> settings;
  bool printConfig = false;
  bool quiet = false;
};

std::map<std::string, std::string> environmentOverrides() {
  std::map<std::string, std::string> env;
  const std::string prefix(sapda::bench::kEnvPrefix);
  for (char** entry = environ; entry != nullptr && *entry != nullptr; ++entry) {
    const std::string kv(*entry);
    const auto eq = kv.find('=');
    if (eq == std::string::npos || kv.compare(0, prefix.size(), prefix) != 0) continue;
    env.emplace(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return env;
}

void addRunFlags(CLI::App& cmd, RunFlags& flags) {
  cmd.add_option("--config", flags.config, "key = value config file");
  cmd.add_option("--seed", flags.seed, "run seed, or a comma-separated list");
  cmd.add_option("--out", flags.out, "output root directory");
  cmd.add_option("--iters", flags.iters, "total training iterations");
  cmd.add_option("--interval", flags.interval, "iterations between weight updates");
  cmd.add_option("--beta", flags.beta, "cluster loss weight");
  cmd.add_option("--mode", flags.mode, "training mode");
  cmd.add_option("--jobs", flags.jobs, "parallel runs");
  cmd.add_option("--set", flags.settings, "any config key as key=value (repeatable)");
  cmd.add_flag("--print-config", flags.printConfig, "print the resolved config and exit");
  cmd.add_flag("-q,--quiet", flags.quiet, "suppress per-run progress lines");
}

int runExperimentCommand(const RunFlags& flags, ExperimentKind kind) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& s : flags.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw sapda::ConfigError("--set expects key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  auto flag = [&](const char* key, const std::string& value) {
    if (!value.empty()) overrides.emplace_back(key, value);
  };
  flag("seeds", flags.seed);
  flag("out", flags.out);
  flag("iters", flags.iters);
  flag("interval", flags.interval);
  flag("beta", flags.beta);
  flag("mode", flags.mode);
  flag("jobs", flags.jobs);
  overrides.emplace_back("kind", std::string(sapda::bench::kindName(kind)));

  std::optional<std::filesystem::path> config;
  if (!flags.config.empty()) config = flags.config;
  const sapda::bench::ExperimentManifest manifest =
      sapda::bench::resolveManifest(config, environmentOverrides(), overrides);
  if (flags.printConfig) {
    std::cout << sapda::bench::serialize(manifest);
    return kOk;
  }

  const sapda::bench::ExperimentResult result = sapda::bench::runExperiment(manifest, flags.quiet ? nullptr : &std::cerr);
  std::cout << "results: " << result.directory.string() << '\n';
  for (const auto& c : result.conditions) {
    std::cout << c.name << ": mean accuracy " << sapda::bench::format9(c.meanAccuracy) << " (std "
              << sapda::bench::format9(c.stdAccuracy) << ", " << c.accuracies.size() << " seeds)\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-adaptive partial domain adaptation on synthetic blobs"};
  app.require_subcommand(1);

  RunFlags run, ablate, sweepBeta, sweepClasses;
  addRunFlags(*app.add_subcommand("run", "train one mode over the configured seeds"), run);
  addRunFlags(*app.add_subcommand("ablate", "train every ablation mode"), ablate);
  addRunFlags(*app.add_subcommand("sweep-beta", "train over the configured beta values"), sweepBeta);
  addRunFlags(*app.add_subcommand("sweep-classes", "train over the configured target class counts"), sweepClasses);

  std::uint64_t checkSeed = 20240601;
  CLI::App* check = app.add_subcommand("check", "run the oracle and invariant suite");
  check->add_option("--seed", checkSeed, "seed for the randomized checks");

  CLI::App* keys = app.add_subcommand("keys", "list config keys and their environment variables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return runExperimentCommand(run, ExperimentKind::kSingle);
    if (app.got_subcommand("ablate")) return runExperimentCommand(ablate, ExperimentKind::kAblation);
    if (app.got_subcommand("sweep-beta")) return runExperimentCommand(sweepBeta, ExperimentKind::kBetaSweep);
    if (app.got_subcommand("sweep-classes")) return runExperimentCommand(sweepClasses, ExperimentKind::kClassSweep);
    if (app.got_subcommand(check)) return sapda::checks::runInvariantSuite(std::cout, checkSeed) ? kOk : kFailure;
    if (app.got_subcommand(keys)) {
      for (const auto& k : sapda::bench::manifestKeys()) {
        std::cout << k.key << "  (" << sapda::bench::envVarFor(k.key) << ")  " << k.description << '\n';
      }
      return kOk;
    }
  } catch (const sapda::ConfigError& e) {
    std::cerr << "sapda: configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const sapda::DivergenceError& e) {
    std::cerr << "sapda: training diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "sapda: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
