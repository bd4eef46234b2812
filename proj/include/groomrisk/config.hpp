#pragma once

// Run configuration: one JSON document whose sections mirror the domain
// types ("fuzzy", "train", "synth", "features", "run"). Every key is optional
// and defaults apply for anything absent.

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "groomrisk/error.hpp"
#include "groomrisk/features.hpp"
#include "groomrisk/fuzzy.hpp"
#include "groomrisk/regressor.hpp"
#include "groomrisk/synthgen.hpp"

namespace groomrisk {

inline constexpr const char* kConfigEnvVar = "GROOMRISK_CONFIG";

struct RunConfig {
  FuzzyConfig fuzzy;
  TrainConfig train;
  SynthConfig synth;
  FeatureSpec features;
  int window_size = kDefaultWindow;  // used when windowing message-level corpora
  bool pooled = false;               // one model for all groups instead of one per group
  bool clamp = false;                // clamp predictions to [0, 12]

  void validate() const {
    fuzzy.validate();
    train.validate();
    synth.validate();
    if (window_size < 1) throw ParameterError("window_size must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"fuzzy", c.fuzzy},
       {"train", c.train},
       {"synth", c.synth},
       {"features", c.features},
       {"run", {{"window_size", c.window_size}, {"pooled", c.pooled}, {"clamp", c.clamp}}}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw ParameterError("config document must be a JSON object");
  if (j.contains("fuzzy")) from_json(j.at("fuzzy"), c.fuzzy);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("synth")) from_json(j.at("synth"), c.synth);
  if (j.contains("features")) from_json(j.at("features"), c.features);
  if (j.contains("run")) {
    const auto& r = j.at("run");
    if (r.contains("window_size")) c.window_size = r.at("window_size").get<int>();
    if (r.contains("pooled")) c.pooled = r.at("pooled").get<bool>();
    if (r.contains("clamp")) c.clamp = r.at("clamp").get<bool>();
  }
}

/// Reads `path`, or the file named by $GROOMRISK_CONFIG when path is empty,
/// or returns defaults when neither is given.
inline RunConfig load_run_config(const std::string& path) {
  std::string resolved = path;
  if (resolved.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') {
      resolved = env;
    }
  }
  RunConfig cfg;
  if (resolved.empty()) return cfg;
  std::ifstream in(resolved);
  if (!in) throw ParameterError("cannot open config file '" + resolved + "'");
  try {
    from_json(nlohmann::json::parse(in), cfg);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("config file '" + resolved + "': " + e.what());
  }
  return cfg;
}

}  // namespace groomrisk
