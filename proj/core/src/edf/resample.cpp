#include "sleepalign/edf/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sleepalign::edf {

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double beta) {
  // x in [-1, 1]
  const double arg = beta * std::sqrt(std::max(0.0, 1.0 - x * x));
  return std::cyl_bessel_i(0.0, arg) / std::cyl_bessel_i(0.0, beta);
}

}  // namespace

RateRatio rate_ratio(double source_hz, double target_hz) {
  if (!(source_hz > 0.0) || !(target_hz > 0.0)) {
    throw InvalidArgument("resample: rates must be positive (source " + std::to_string(source_hz) +
                          " Hz, target " + std::to_string(target_hz) + " Hz)");
  }
  auto up = static_cast<std::int64_t>(std::llround(target_hz * 1000.0));
  auto down = static_cast<std::int64_t>(std::llround(source_hz * 1000.0));
  if (up == 0 || down == 0) throw InvalidArgument("resample: rate below 1 mHz resolution");
  const auto g = std::gcd(up, down);
  return {up / g, down / g};
}

std::vector<double> resample(std::span<const double> input, double source_hz, double target_hz) {
  const auto [up, down] = rate_ratio(source_hz, target_hz);
  if (up == down) return {input.begin(), input.end()};

  const auto n_in = static_cast<std::int64_t>(input.size());
  // round(n * up / down) in integer arithmetic
  const std::int64_t n_out = (2 * n_in * up + down) / (2 * down);

  // Prototype low-pass at the upsampled rate, centred on tap `half`.
  const std::int64_t half = static_cast<std::int64_t>(kTapsPerPhase / 2) * up;
  const double cutoff = 0.5 / static_cast<double>(std::max(up, down));  // cycles per upsampled sample
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  for (std::int64_t k = -half; k <= half; ++k) {
    const double x = static_cast<double>(k);
    taps[static_cast<std::size_t>(k + half)] = static_cast<double>(up) * 2.0 * cutoff *
                                               sinc(2.0 * cutoff * x) *
                                               kaiser(x / static_cast<double>(half), kKaiserBeta);
  }

  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t p = n * down;  // position on the upsampled grid
    // Input sample i sits at upsampled position i*up; keep |p - i*up| <= half.
    std::int64_t i_lo = (p - half + up - 1) / up;
    if (p - half < 0) i_lo = -((half - p) / up);
    std::int64_t i_hi = (p + half) / up;
    i_lo = std::max<std::int64_t>(i_lo, 0);
    i_hi = std::min<std::int64_t>(i_hi, n_in - 1);
    double acc = 0.0;
    for (std::int64_t i = i_lo; i <= i_hi; ++i) {
      acc += taps[static_cast<std::size_t>(p - i * up + half)] * input[static_cast<std::size_t>(i)];
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

RawSignal resample(const RawSignal& signal, double target_hz) {
  RawSignal out;
  out.label = signal.label;
  out.sample_rate_hz = target_hz;
  out.samples = resample(signal.samples, signal.sample_rate_hz, target_hz);
  return out;
}

}  // namespace sleepalign::edf
