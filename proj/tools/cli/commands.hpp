#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sleepalign::cli {

// Everything a subcommand receives from the command line. `flags` holds
// subcommand-specific options already mapped to config keys; `overrides` are
// raw --set assignments, applied last.
struct Invocation {
  std::string subcommand;
  std::string config_path;
  nlohmann::json flags = nlohmann::json::object();
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out_dir;
};

// Defaults that double as the schema of each subcommand's config.
nlohmann::json default_config(const std::string& subcommand);

// defaults <- config file <- flags <- --set, then validated.
nlohmann::json resolve_config(const Invocation& inv);

// Runs one subcommand and writes its outputs plus manifest.json into
// inv.out_dir. Throws on any failure, after removing partial outputs.
nlohmann::json run(const Invocation& inv);

const std::vector<std::string>& subcommands();

}  // namespace sleepalign::cli
