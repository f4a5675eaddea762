#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sleepalign {

// One scoring epoch is 30 s of single-channel EEG at 100 Hz.
inline constexpr double kTargetRateHz = 100.0;
inline constexpr double kEpochSeconds = 30.0;
inline constexpr std::size_t kEpochSamples = 3000;
inline constexpr std::size_t kNumStages = 5;

enum class Stage : int { kW = 0, kN1 = 1, kN2 = 2, kN3 = 3, kREM = 4 };

enum class Domain : int { kSource = 0, kTarget = 1 };

inline constexpr std::array<Stage, kNumStages> kAllStages = {
    Stage::kW, Stage::kN1, Stage::kN2, Stage::kN3, Stage::kREM};

std::string_view stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);
inline int stage_index(Stage s) { return static_cast<int>(s); }
Stage stage_from_index(int index);

std::string_view domain_name(Domain d);
Domain domain_from_name(std::string_view name);

// Base class for all library errors. Subsystems derive from it so callers can
// catch one type while tests can still distinguish failure kinds.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace sleepalign
