#include "sleepalign/edf/labels.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "../binary_io.hpp"

namespace sleepalign::edf {

namespace {

struct TokenRule {
  std::string token;  // upper-case
  MappedLabel label;
};

// AASM merge: N4 folds into N3; movement and unscored epochs are dropped.
const std::vector<TokenRule>& token_table() {
  static const std::vector<TokenRule> table = {
      {"W", Stage::kW},
      {"1", Stage::kN1},
      {"2", Stage::kN2},
      {"3", Stage::kN3},
      {"4", Stage::kN3},
      {"R", Stage::kREM},
      {"MOVEMENT", std::nullopt},
      {"UNKNOWN", std::nullopt},
      {"WAKE", Stage::kW},
      {"N1", Stage::kN1},
      {"N2", Stage::kN2},
      {"N3", Stage::kN3},
      {"N4", Stage::kN3},
      {"REM", Stage::kREM},
      {"SLEEP STAGE W", Stage::kW},
      {"SLEEP STAGE 1", Stage::kN1},
      {"SLEEP STAGE 2", Stage::kN2},
      {"SLEEP STAGE 3", Stage::kN3},
      {"SLEEP STAGE 4", Stage::kN3},
      {"SLEEP STAGE R", Stage::kREM},
      {"SLEEP STAGE ?", std::nullopt},
      {"MOVEMENT TIME", std::nullopt},
      {"?", std::nullopt},
  };
  return table;
}

std::string canonical(std::string_view raw) {
  while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.front()))) raw.remove_prefix(1);
  while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back()))) raw.remove_suffix(1);
  std::string out;
  bool in_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(std::toupper(c)));
  }
  return out;
}

}  // namespace

MappedLabel map_label(std::string_view raw_token) {
  const auto key = canonical(raw_token);
  for (const auto& rule : token_table()) {
    if (rule.token == key) return rule.label;
  }
  std::string known;
  for (const auto& rule : token_table()) {
    if (!known.empty()) known += ", ";
    known += rule.token;
  }
  throw InvalidArgument("unrecognized hypnogram token '" + std::string(raw_token) + "' (known: " + known + ")");
}

const std::vector<std::string>& known_label_tokens() {
  static const std::vector<std::string> tokens = [] {
    std::vector<std::string> out;
    for (const auto& rule : token_table()) out.push_back(rule.token);
    return out;
  }();
  return tokens;
}

std::vector<std::string> parse_hypnogram(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    tokens.push_back(line.substr(first, last - first + 1));
  }
  return tokens;
}

std::vector<std::string> read_hypnogram(const std::string& path) {
  return parse_hypnogram(detail::read_file(path));
}

}  // namespace sleepalign::edf
