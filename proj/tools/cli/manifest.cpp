#include "cli/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "sleepalign/common.hpp"

namespace sleepalign::cli {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read input '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void RunManifest::add_input(const std::filesystem::path& path) { input_hashes[path.string()] = fnv1a_file(path); }

nlohmann::json RunManifest::to_json() const {
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.4f", wall_clock_seconds);
  return {{"subcommand", subcommand},
          {"config", config},
          {"input_hashes", input_hashes},
          {"outputs", outputs},
          {"seed", seed},
          {"tool_version", tool_version},
          {"wall_clock_seconds", std::stod(wall)},
          {"notes", notes}};
}

OutputSet::OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) throw Error("an output directory is required (--out)");
  if (!std::filesystem::exists(dir_)) {
    std::filesystem::create_directories(dir_);
    created_dir_ = true;
  } else if (!std::filesystem::is_directory(dir_)) {
    throw Error("output path '" + dir_.string() + "' is not a directory");
  }
}

OutputSet::~OutputSet() {
  if (committed_) return;
  std::error_code ec;
  for (const auto& f : files_) std::filesystem::remove(f, ec);
  if (created_dir_ && std::filesystem::is_empty(dir_, ec)) std::filesystem::remove(dir_, ec);
}

std::filesystem::path OutputSet::declare(const std::string& name) {
  files_.push_back(dir_ / name);
  return files_.back();
}

std::vector<std::string> OutputSet::paths() const {
  std::vector<std::string> out;
  for (const auto& f : files_) out.push_back(f.string());
  return out;
}

void OutputSet::verify() const {
  for (const auto& f : files_) {
    std::error_code ec;
    if (!std::filesystem::exists(f) || std::filesystem::file_size(f, ec) == 0) {
      throw Error("output '" + f.string() + "' was not written");
    }
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace sleepalign::cli
