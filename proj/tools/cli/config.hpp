#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/aligner/aligner.hpp"
#include "sleepalign/common.hpp"
#include "sleepalign/nn/mrcnn.hpp"
#include "sleepalign/pipeline/train.hpp"

namespace sleepalign::cli {

// Schema or value problem in a run configuration; `path` is the dotted key.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path.empty() ? message : "config key '" + path + "': " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Reads a JSON object from `path`; an empty path gives an empty object.
nlohmann::json load_config_file(const std::string& path);

// Applies "a.b.c=value". The value is parsed as JSON when possible and kept
// as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Deep merge: objects merge key by key, everything else replaces.
void merge_into(nlohmann::json& base, const nlohmann::json& overlay);

// Checks `config` against the shape of `defaults`: no unknown keys, matching
// JSON types (integers are accepted where numbers are expected), and no
// remaining nulls (a null default marks a required key).
void validate_shape(const nlohmann::json& defaults, const nlohmann::json& config, const std::string& prefix = "");

// Typed views of validated config sections. Library validation messages are
// rethrown as ConfigError with the section's key path.
pipeline::TrainConfig train_config(const nlohmann::json& section, const std::string& path);
nn::MrcnnConfig model_config(const nlohmann::json& section, const std::string& path);
aligner::SolverConfig solver_config(const nlohmann::json& section, const std::string& path);
aligner::SelectionPolicy policy_config(const nlohmann::json& section, const std::string& path);

nlohmann::json default_train_json();
nlohmann::json default_model_json();
nlohmann::json default_solver_json();
nlohmann::json default_policy_json();

}  // namespace sleepalign::cli
