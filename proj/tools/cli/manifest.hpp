#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sleepalign::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// 64-bit FNV-1a over a file's bytes, as 16 lowercase hex digits.
std::string fnv1a_file(const std::filesystem::path& path);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();  // fully resolved
  std::map<std::string, std::string> input_hashes;   // path -> fnv1a
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  double wall_clock_seconds = 0.0;
  nlohmann::json notes = nlohmann::json::object();

  void add_input(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Tracks files a command declares as outputs. Unless commit() is called, the
// destructor removes whatever was created, so a failed run leaves nothing
// half-written behind.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir);
  ~OutputSet();
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  // Declares `name` inside the output directory and returns its full path.
  std::filesystem::path declare(const std::string& name);
  const std::filesystem::path& dir() const { return dir_; }
  std::vector<std::string> paths() const;
  // Checks every declared file exists and is non-empty.
  void verify() const;
  void commit() { committed_ = true; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
  bool created_dir_ = false;
  bool committed_ = false;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sleepalign::cli
