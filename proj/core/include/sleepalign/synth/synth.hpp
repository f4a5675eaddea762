#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/common.hpp"
#include "sleepalign/edf/dataset.hpp"

namespace sleepalign::synth {

struct BandComponent {
  double f_lo = 0.5;       // Hz
  double f_hi = 4.0;       // Hz
  double amplitude = 1.0;  // uV, total over the component's sinusoids
};

// Oscillator recipe for one sleep stage. The first component is the stage's
// designated (dominant) band.
struct StageSpectrum {
  Stage stage = Stage::kW;
  std::vector<BandComponent> components;
  double noise_sigma = 1.0;  // uV, white Gaussian

  void validate() const;
};

// Domain-shift knobs applied on top of a spectrum table.
struct ShiftSpec {
  double amplitude_scale = 1.0;    // multiplies oscillator amplitudes
  double noise_sigma_delta = 0.0;  // added to every stage's noise sigma
  double frequency_drift = 0.0;    // Hz added to every band
  double channel_gain = 1.0;       // multiplies the final signal

  static ShiftSpec identity() { return {}; }
  // Amplitude x2.5, noise +1 sigma (of the table's mean noise), drift +2 Hz.
  static ShiftSpec strong(double base_noise_sigma);
  bool is_identity() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ShiftSpec from_json(const nlohmann::json& j);
};

struct SpectrumTable {
  std::string version = "synth-bands-v1";
  int sinusoids_per_band = 4;
  std::vector<StageSpectrum> stages;  // one per Stage, in Stage order

  const StageSpectrum& at(Stage s) const;
  double mean_noise_sigma() const;
  void validate() const;
  nlohmann::json to_json() const;
  static SpectrumTable from_json(const nlohmann::json& j);

  // W alpha, N1 theta, N2 spindle+theta, N3 delta, REM low-beta+theta.
  static SpectrumTable default_table();
};

// Sum of random-phase sinusoids per band (frequency uniform in the drifted
// band) plus white noise; kEpochSamples samples at 100 Hz, deterministic in
// `seed`.
edf::SignalEpoch gen_epoch(Stage stage, const SpectrumTable& table, const ShiftSpec& shift, std::uint64_t seed);

struct DomainRequest {
  int n_per_class = 10;
  SpectrumTable table = SpectrumTable::default_table();
  ShiftSpec shift;
  std::uint64_t seed = 0;
  Domain domain = Domain::kSource;
  std::string subject_id;  // defaults to "synth-<seed>"
};

// Balanced labelled dataset. Epoch i has stage i mod 5 and is generated from
// the derived seed mix(seed) ^ i, so each epoch is independent of the others.
edf::EpochDataset gen_domain(const DomainRequest& request);

std::uint64_t epoch_seed(std::uint64_t base, std::uint64_t index);


}  // namespace sleepalign::synth
