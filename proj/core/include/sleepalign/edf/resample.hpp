#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sleepalign/edf/edf.hpp"

namespace sleepalign::edf {

struct RateRatio {
  std::int64_t up = 1;
  std::int64_t down = 1;
};

// Reduced up/down factors for target/source, resolved to 1e-3 Hz.
RateRatio rate_ratio(double source_hz, double target_hz);

// Polyphase windowed-sinc resampler: Kaiser window (beta = 8), 64 taps per
// phase, cutoff at the Nyquist frequency of the lower rate. Output length is
// round(n * target / source). Equal rates return the input unchanged.
std::vector<double> resample(std::span<const double> input, double source_hz, double target_hz);
RawSignal resample(const RawSignal& signal, double target_hz = kTargetRateHz);

inline constexpr double kKaiserBeta = 8.0;
inline constexpr int kTapsPerPhase = 64;

}  // namespace sleepalign::edf
