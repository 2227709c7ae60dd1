#include "sapda/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "sapda/errors.hpp"

namespace sapda::bench {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void badValue(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "': expected " +
                    std::string(expected));
}

double toDouble(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) badValue(key, text, "a real number");
  return v;
}

long long toInteger(std::string_view key, std::string_view text) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) badValue(key, text, "an integer");
  return v;
}

int toInt(std::string_view key, std::string_view text) {
  const long long v = toInteger(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) badValue(key, text, "a 32-bit integer");
  return static_cast<int>(v);
}

std::uint64_t toSeed(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) badValue(key, text, "a non-negative integer");
  return v;
}

bool toBool(std::string_view key, std::string_view text) {
  std::string s(trim(text));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  badValue(key, text, "true or false");
}

std::vector<std::string_view> splitList(std::string_view text) {
  std::vector<std::string_view> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    out.push_back(trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string formatDouble(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T, typename F>
std::string joinList(const std::vector<T>& values, F format) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    out += format(values[i]);
  }
  return out;
}

struct Field {
  KeyInfo info;
  std::function<std::string(const ExperimentManifest&)> get;
  std::function<void(ExperimentManifest&, std::string_view key, std::string_view value)> set;
};

const std::vector<Field>& fields() {
  using M = ExperimentManifest;
  using SV = std::string_view;
  auto d = [](double v) { return formatDouble(v); };
  auto i = [](long long v) { return std::to_string(v); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  static const std::vector<Field> table = {
      {{"kind", "experiment kind: single, ablation, beta-sweep, class-sweep"},
       [](const M& m) { return std::string(kindName(m.kind)); },
       [](M& m, SV k, SV v) {
         const auto kind = parseKind(trim(v));
         if (!kind) badValue(k, v, "one of single, ablation, beta-sweep, class-sweep");
         m.kind = *kind;
       }},
      {{"seeds", "comma-separated run seeds (task and training)"},
       [](const M& m) { return joinList(m.seeds, [](std::uint64_t s) { return std::to_string(s); }); },
       [](M& m, SV k, SV v) {
         m.seeds.clear();
         for (SV item : splitList(v)) m.seeds.push_back(toSeed(k, item));
       }},
      {{"out", "output root directory"}, [](const M& m) { return m.outputDir; },
       [](M& m, SV, SV v) { m.outputDir = std::string(trim(v)); }},
      {{"jobs", "parallel runs"}, [i](const M& m) { return i(m.jobs); },
       [](M& m, SV k, SV v) { m.jobs = toInt(k, v); }},
      {{"dump_data", "write dataset.csv next to each run history"}, [b](const M& m) { return b(m.dumpData); },
       [](M& m, SV k, SV v) { m.dumpData = toBool(k, v); }},
      {{"source_classes", "number of source classes |C_s|"}, [i](const M& m) { return i(m.task.sourceClassCount); },
       [](M& m, SV k, SV v) { m.task.sourceClassCount = toInt(k, v); }},
      {{"target_classes", "number of target classes |C_t|"}, [i](const M& m) { return i(m.task.targetClassCount); },
       [](M& m, SV k, SV v) { m.task.targetClassCount = toInt(k, v); }},
      {{"samples_per_class", "samples generated per class and domain"},
       [i](const M& m) { return i(m.task.samplesPerClass); },
       [](M& m, SV k, SV v) { m.task.samplesPerClass = toInt(k, v); }},
      {{"input_dim", "input dimension (>= 2)"}, [i](const M& m) { return i(m.task.inputDim); },
       [](M& m, SV k, SV v) { m.task.inputDim = toInt(k, v); }},
      {{"radius", "blob circle radius"}, [d](const M& m) { return d(m.task.radius); },
       [](M& m, SV k, SV v) { m.task.radius = toDouble(k, v); }},
      {{"noise", "isotropic blob standard deviation"}, [d](const M& m) { return d(m.task.noise); },
       [](M& m, SV k, SV v) { m.task.noise = toDouble(k, v); }},
      {{"rotation_deg", "target rotation in degrees"}, [d](const M& m) { return d(m.task.rotationDeg); },
       [](M& m, SV k, SV v) { m.task.rotationDeg = toDouble(k, v); }},
      {{"scale", "target scale factor"}, [d](const M& m) { return d(m.task.scale); },
       [](M& m, SV k, SV v) { m.task.scale = toDouble(k, v); }},
      {{"translation", "target translation, comma-separated (empty = zero)"},
       [d](const M& m) { return joinList(m.task.translation, d); },
       [](M& m, SV k, SV v) {
         m.task.translation.clear();
         for (SV item : splitList(v)) m.task.translation.push_back(toDouble(k, item));
       }},
      {{"iters", "total training iterations"}, [i](const M& m) { return i(m.train.totalIterations); },
       [](M& m, SV k, SV v) { m.train.totalIterations = toInt(k, v); }},
      {{"interval", "iterations between weight updates"}, [i](const M& m) { return i(m.train.updateInterval); },
       [](M& m, SV k, SV v) { m.train.updateInterval = toInt(k, v); }},
      {{"batch_size", "minibatch size per domain"}, [i](const M& m) { return i(m.train.batchSize); },
       [](M& m, SV k, SV v) { m.train.batchSize = toInt(k, v); }},
      {{"beta", "cluster loss weight"}, [d](const M& m) { return d(m.train.beta); },
       [](M& m, SV k, SV v) { m.train.beta = toDouble(k, v); }},
      {{"gamma0", "base learning rate"}, [d](const M& m) { return d(m.train.lr.gamma0); },
       [](M& m, SV k, SV v) { m.train.lr.gamma0 = toDouble(k, v); }},
      {{"eta", "learning-rate annealing scale"}, [d](const M& m) { return d(m.train.lr.eta); },
       [](M& m, SV k, SV v) { m.train.lr.eta = toDouble(k, v); }},
      {{"alpha", "learning-rate annealing exponent"}, [d](const M& m) { return d(m.train.lr.alpha); },
       [](M& m, SV k, SV v) { m.train.lr.alpha = toDouble(k, v); }},
      {{"lambda_ramp", "ramp gradient reversal 0 -> 1 (else use lambda)"}, [b](const M& m) { return b(m.train.lambdaRamp); },
       [](M& m, SV k, SV v) { m.train.lambdaRamp = toBool(k, v); }},
      {{"lambda", "fixed gradient reversal strength when lambda_ramp = false"},
       [d](const M& m) { return d(m.train.fixedLambda); },
       [](M& m, SV k, SV v) { m.train.fixedLambda = toDouble(k, v); }},
      {{"tau_uniform", "spread below which k* = 1"}, [d](const M& m) { return d(m.train.tauUniform); },
       [](M& m, SV k, SV v) { m.train.tauUniform = toDouble(k, v); }},
      {{"mode", "training mode for single runs and sweeps"},
       [](const M& m) { return std::string(train::modeName(m.train.mode)); },
       [](M& m, SV k, SV v) {
         const auto mode = train::parseMode(trim(v));
         if (!mode) badValue(k, v, "a known mode (see `modes`)");
         m.train.mode = *mode;
       }},
      {{"balanced_source", "class-balanced source minibatches"}, [b](const M& m) { return b(m.train.balancedSource); },
       [](M& m, SV k, SV v) { m.train.balancedSource = toBool(k, v); }},
      {{"target_entropy_min", "add entropy minimization on target predictions"},
       [b](const M& m) { return b(m.train.targetEntropyMin); },
       [](M& m, SV k, SV v) { m.train.targetEntropyMin = toBool(k, v); }},
      {{"entropy_lambda", "weight of the target entropy term"}, [d](const M& m) { return d(m.train.entropyLambda); },
       [](M& m, SV k, SV v) { m.train.entropyLambda = toDouble(k, v); }},
      {{"hidden_width", "feature extractor hidden width"}, [i](const M& m) { return i(m.train.hiddenWidth); },
       [](M& m, SV k, SV v) { m.train.hiddenWidth = toInt(k, v); }},
      {{"hidden_layers", "feature extractor hidden layers"}, [i](const M& m) { return i(m.train.hiddenLayers); },
       [](M& m, SV k, SV v) { m.train.hiddenLayers = toInt(k, v); }},
      {{"feature_dim", "feature dimension"}, [i](const M& m) { return i(m.train.featureDim); },
       [](M& m, SV k, SV v) { m.train.featureDim = toInt(k, v); }},
      {{"betas", "beta values for beta-sweep"}, [d](const M& m) { return joinList(m.betas, d); },
       [](M& m, SV k, SV v) {
         m.betas.clear();
         for (SV item : splitList(v)) m.betas.push_back(toDouble(k, item));
       }},
      {{"class_counts", "target class counts for class-sweep"},
       [i](const M& m) { return joinList(m.targetClassCounts, [](int c) { return std::to_string(c); }); },
       [](M& m, SV k, SV v) {
         m.targetClassCounts.clear();
         for (SV item : splitList(v)) m.targetClassCounts.push_back(toInt(k, item));
       }},
      {{"modes", "modes for ablation"},
       [](const M& m) { return joinList(m.modes, [](train::Mode mode) { return std::string(train::modeName(mode)); }); },
       [](M& m, SV k, SV v) {
         m.modes.clear();
         for (SV item : splitList(v)) {
           const auto mode = train::parseMode(item);
           if (!mode) badValue(k, item, "a known mode");
           m.modes.push_back(*mode);
         }
       }},
  };
  return table;
}

std::string validKeyList() {
  std::string out;
  for (const auto& f : fields()) {
    if (!out.empty()) out += ", ";
    out += f.info.key;
  }
  return out;
}

}  // namespace

std::string_view kindName(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSingle:
      return "single";
    case ExperimentKind::kAblation:
      return "ablation";
    case ExperimentKind::kBetaSweep:
      return "beta-sweep";
    case ExperimentKind::kClassSweep:
      return "class-sweep";
  }
  return "?";
}

std::optional<ExperimentKind> parseKind(std::string_view name) {
  for (ExperimentKind k : {ExperimentKind::kSingle, ExperimentKind::kAblation, ExperimentKind::kBetaSweep,
                           ExperimentKind::kClassSweep}) {
    if (kindName(k) == name) return k;
  }
  return std::nullopt;
}

void ExperimentManifest::validate() const {
  task.validate();
  train.validate();
  auto fail = [](const std::string& what) { throw ConfigError("invalid manifest: " + what); };
  if (seeds.empty()) fail("seeds must list at least one seed");
  if (outputDir.empty()) fail("out must not be empty");
  if (jobs < 1) fail("jobs must be >= 1");
  if (task.sourceClassCount < 4) fail("source_classes must be >= 4 for weight evaluation");
  if (kind == ExperimentKind::kBetaSweep) {
    if (betas.empty()) fail("betas must not be empty for beta-sweep");
    for (double b : betas) {
      if (!(b >= 0.0) || !std::isfinite(b)) fail("betas must be finite and >= 0");
    }
  }
  if (kind == ExperimentKind::kClassSweep) {
    if (targetClassCounts.empty()) fail("class_counts must not be empty for class-sweep");
    for (int c : targetClassCounts) {
      if (c < 1 || c > task.sourceClassCount) fail("class_counts entries must lie in [1, source_classes]");
    }
  }
  if (kind == ExperimentKind::kAblation && modes.empty()) fail("modes must not be empty for ablation");
}

const std::vector<KeyInfo>& manifestKeys() {
  static const std::vector<KeyInfo> keys = [] {
    std::vector<KeyInfo> out;
    for (const auto& f : fields()) out.push_back(f.info);
    return out;
  }();
  return keys;
}

void applySetting(ExperimentManifest& manifest, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto& f : fields()) {
    if (f.info.key == key) {
      f.set(manifest, key, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + std::string(key) + "'; valid keys: " + validKeyList());
}

std::string serialize(const ExperimentManifest& manifest) {
  std::string out;
  for (const auto& f : fields()) out += f.info.key + " = " + f.get(manifest) + "\n";
  return out;
}

void applyManifestText(ExperimentManifest& manifest, std::string_view text, std::string_view origin) {
  std::size_t lineNo = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++lineNo;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(lineNo) + ": expected 'key = value'");
      }
      try {
        applySetting(manifest, line.substr(0, eq), line.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(lineNo) + ": " + e.what());
      }
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
}

ExperimentManifest parseManifest(std::string_view text, std::string_view origin) {
  ExperimentManifest manifest;
  applyManifestText(manifest, text, origin);
  return manifest;
}

std::string envVarFor(std::string_view key) {
  std::string out(kEnvPrefix);
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

ExperimentManifest resolveManifest(const std::optional<std::filesystem::path>& configPath,
                                   const std::map<std::string, std::string>& environment,
                                   const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentManifest manifest;
  if (configPath) {
    std::ifstream in(*configPath);
    if (!in) throw ConfigError("config file not found: " + configPath->string());
    std::ostringstream text;
    text << in.rdbuf();
    applyManifestText(manifest, text.str(), configPath->string());
  }
  for (const auto& f : fields()) {
    const auto it = environment.find(envVarFor(f.info.key));
    if (it == environment.end()) continue;
    try {
      f.set(manifest, f.info.key, it->second);
    } catch (const ConfigError& e) {
      throw ConfigError(it->first + ": " + e.what());
    }
  }
  for (const auto& [key, value] : overrides) applySetting(manifest, key, value);
  manifest.validate();
  return manifest;
}

std::uint64_t manifestHash(const ExperimentManifest& manifest) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize(manifest)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sapda::bench
