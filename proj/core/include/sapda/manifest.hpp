#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sapda/data.hpp"
#include "sapda/trainer.hpp"

namespace sapda::bench {

enum class ExperimentKind { kSingle, kAblation, kBetaSweep, kClassSweep };

std::string_view kindName(ExperimentKind kind);
std::optional<ExperimentKind> parseKind(std::string_view name);

/// Everything needed to reproduce an experiment. The on-disk form is a flat
/// `key = value` file; see `manifestKeys()` for the schema.
struct ExperimentManifest {
  ExperimentKind kind = ExperimentKind::kSingle;
  data::PdaTaskSpec task = data::blobs8to4();
  train::TrainConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string outputDir = "runs";
  std::vector<double> betas = {0.01, 0.02, 0.05, 0.1, 0.5, 1.0};
  std::vector<int> targetClassCounts = {2, 4, 6, 8};
  std::vector<train::Mode> modes = train::allModes();
  int jobs = 1;
  bool dumpData = false;

  /// Throws ConfigError naming the violated constraint.
  void validate() const;
};

struct KeyInfo {
  std::string key;
  std::string description;
};

/// Every accepted key, in serialization order.
const std::vector<KeyInfo>& manifestKeys();

/// Sets one key. Unknown keys raise ConfigError listing the valid keys;
/// malformed values raise ConfigError naming the key.
void applySetting(ExperimentManifest& manifest, std::string_view key, std::string_view value);

/// Canonical text form: one `key = value` line per key in schema order, with
/// shortest round-trip formatting for reals.
std::string serialize(const ExperimentManifest& manifest);

/// Parses `key = value` lines; `#` starts a comment. `origin` prefixes errors.
ExperimentManifest parseManifest(std::string_view text, std::string_view origin = "<config>");

/// Applies lines from `text` on top of an existing manifest.
void applyManifestText(ExperimentManifest& manifest, std::string_view text, std::string_view origin);

/// Environment variables named kEnvPrefix + upper-cased key (dashes become
/// underscores) override file values, e.g. SAPDA_ITERS=500.
inline constexpr std::string_view kEnvPrefix = "SAPDA_";
std::string envVarFor(std::string_view key);

/// Layers defaults < config file < environment < explicit overrides, then
/// validates. A missing config file raises ConfigError with the path.
ExperimentManifest resolveManifest(const std::optional<std::filesystem::path>& configPath,
                                   const std::map<std::string, std::string>& environment,
                                   const std::vector<std::pair<std::string, std::string>>& overrides);

/// FNV-1a 64 of the canonical serialization.
std::uint64_t manifestHash(const ExperimentManifest& manifest);

}  // namespace sapda::bench
