#include "sleepalign/common.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"

namespace sleepalign {

namespace {
constexpr std::array<std::string_view, kNumStages> kStageNames = {"W", "N1", "N2", "N3", "REM"};
}

std::string_view stage_name(Stage s) { return kStageNames.at(static_cast<std::size_t>(s)); }

std::optional<Stage> stage_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == name) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

Stage stage_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumStages)) {
    throw InvalidArgument("stage index out of range: " + std::to_string(index));
  }
  return static_cast<Stage>(index);
}

std::string_view domain_name(Domain d) { return d == Domain::kSource ? "source" : "target"; }

Domain domain_from_name(std::string_view name) {
  if (name == "source") return Domain::kSource;
  if (name == "target") return Domain::kTarget;
  throw InvalidArgument("unknown domain tag '" + std::string(name) + "' (expected source|target)");
}

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace detail
}  // namespace sleepalign
