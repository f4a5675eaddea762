#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sleepalign/common.hpp"

namespace sleepalign::edf {

// Result of mapping one hypnogram token. An empty optional means the epoch is
// dropped (movement or unscored).
using MappedLabel = std::optional<Stage>;

// W->W, 1->N1, 2->N2, 3->N3, 4->N3, R->REM, MOVEMENT/UNKNOWN->drop.
// Sleep-EDF long forms ("Sleep stage 4", "Movement time", "Sleep stage ?")
// and N-prefixed forms are accepted too; matching is case-insensitive.
MappedLabel map_label(std::string_view raw_token);

// Every token accepted by map_label, in table order.
const std::vector<std::string>& known_label_tokens();

// One token per line; blank lines and lines starting with '#' are skipped.
std::vector<std::string> read_hypnogram(const std::string& path);
std::vector<std::string> parse_hypnogram(std::string_view text);

}  // namespace sleepalign::edf
