#pragma once

// Config-driven batch experiments. A config is one JSON object whose "kind"
// selects the experiment; every other key is checked against that kind's
// schema before anything runs, and unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace icl {

inline constexpr const char* kToolVersion = "0.1.0";

struct FieldSpec {
  std::string name;
  std::string type;  // uint, number, string, bool, object, array
  bool required = false;
  std::string help;
};

struct ExperimentKind {
  std::string name;
  std::string summary;
  std::vector<FieldSpec> fields;
  std::vector<std::string> outputs;
};

/// Stable, alphabetical-by-registration catalog of the experiment kinds.
const std::vector<ExperimentKind>& experiment_catalog();
std::string catalog_text();

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

struct RunResult {
  std::string out_dir;
  std::vector<std::string> files;  // written CSVs, in emission order
  nlohmann::json manifest;
};

/// Validates the config (ConfigError on failure) and writes the declared CSVs
/// plus manifest.json into the output directory.
RunResult run_experiment(nlohmann::json config, const RunOptions& opt = {});
RunResult run_config_file(const std::string& path, const RunOptions& opt = {});

/// FNV-1a 64-bit hash of the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace icl
