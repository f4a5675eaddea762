#include "sleepalign/synth/synth.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "sleepalign/rng.hpp"

namespace sleepalign::synth {

void StageSpectrum::validate() const {
  if (components.empty()) throw InvalidArgument("spectrum for " + std::string(stage_name(stage)) + " has no bands");
  for (const auto& c : components) {
    if (!(c.f_lo > 0.0 && c.f_lo < c.f_hi && c.f_hi < 50.0)) {
      throw InvalidArgument("band [" + std::to_string(c.f_lo) + ", " + std::to_string(c.f_hi) + "] Hz of " +
                            std::string(stage_name(stage)) + " must satisfy 0 < f_lo < f_hi < 50");
    }
    if (!(c.amplitude >= 0.0)) throw InvalidArgument("band amplitude must be >= 0");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
}

ShiftSpec ShiftSpec::strong(double base_noise_sigma) {
  ShiftSpec s;
  s.amplitude_scale = 2.5;
  s.noise_sigma_delta = base_noise_sigma;
  s.frequency_drift = 2.0;
  return s;
}

bool ShiftSpec::is_identity() const {
  return amplitude_scale == 1.0 && noise_sigma_delta == 0.0 && frequency_drift == 0.0 && channel_gain == 1.0;
}

void ShiftSpec::validate() const {
  if (!(amplitude_scale > 0.0)) throw InvalidArgument("shift amplitude scale must be > 0");
  if (!std::isfinite(noise_sigma_delta) || !std::isfinite(frequency_drift) || !std::isfinite(channel_gain)) {
    throw InvalidArgument("shift parameters must be finite");
  }
}

nlohmann::json ShiftSpec::to_json() const {
  return {{"amplitude_scale", amplitude_scale},
          {"noise_sigma_delta", noise_sigma_delta},
          {"frequency_drift", frequency_drift},
          {"channel_gain", channel_gain}};
}

ShiftSpec ShiftSpec::from_json(const nlohmann::json& j) {
  ShiftSpec s;
  s.amplitude_scale = j.value("amplitude_scale", s.amplitude_scale);
  s.noise_sigma_delta = j.value("noise_sigma_delta", s.noise_sigma_delta);
  s.frequency_drift = j.value("frequency_drift", s.frequency_drift);
  s.channel_gain = j.value("channel_gain", s.channel_gain);
  s.validate();
  return s;
}

const StageSpectrum& SpectrumTable::at(Stage s) const {
  for (const auto& st : stages) {
    if (st.stage == s) return st;
  }
  throw InvalidArgument("spectrum table has no entry for " + std::string(stage_name(s)));
}

double SpectrumTable::mean_noise_sigma() const {
  if (stages.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : stages) total += s.noise_sigma;
  return total / static_cast<double>(stages.size());
}

void SpectrumTable::validate() const {
  if (sinusoids_per_band < 1) throw InvalidArgument("sinusoids_per_band must be >= 1");
  for (auto s : kAllStages) at(s).validate();
}

nlohmann::json SpectrumTable::to_json() const {
  nlohmann::json st = nlohmann::json::object();
  for (const auto& s : stages) {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& c : s.components) bands.push_back({{"f_lo", c.f_lo}, {"f_hi", c.f_hi}, {"amplitude", c.amplitude}});
    st[std::string(stage_name(s.stage))] = {{"bands", bands}, {"noise_sigma", s.noise_sigma}};
  }
  return {{"version", version}, {"sinusoids_per_band", sinusoids_per_band}, {"stages", st}};
}

SpectrumTable SpectrumTable::from_json(const nlohmann::json& j) {
  SpectrumTable t;
  t.version = j.value("version", t.version);
  t.sinusoids_per_band = j.value("sinusoids_per_band", t.sinusoids_per_band);
  const auto& st = j.at("stages");
  for (auto s : kAllStages) {
    const auto key = std::string(stage_name(s));
    if (!st.contains(key)) throw InvalidArgument("spectrum preset lacks stage '" + key + "'");
    StageSpectrum spec;
    spec.stage = s;
    spec.noise_sigma = st.at(key).at("noise_sigma").get<double>();
    for (const auto& b : st.at(key).at("bands")) {
      spec.components.push_back({b.at("f_lo").get<double>(), b.at("f_hi").get<double>(), b.at("amplitude").get<double>()});
    }
    t.stages.push_back(std::move(spec));
  }
  t.validate();
  return t;
}

SpectrumTable SpectrumTable::default_table() {
  constexpr double kNoise = 5.0;
  SpectrumTable t;
  t.stages = {
      {Stage::kW, {{8.0, 12.0, 30.0}}, kNoise},
      {Stage::kN1, {{4.0, 8.0, 30.0}}, kNoise},
      {Stage::kN2, {{12.0, 14.0, 30.0}, {4.0, 8.0, 15.0}}, kNoise},
      {Stage::kN3, {{0.5, 4.0, 50.0}}, kNoise},
      {Stage::kREM, {{15.0, 20.0, 25.0}, {4.0, 8.0, 15.0}}, kNoise},
  };
  return t;
}

std::uint64_t epoch_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base) ^ index; }

edf::SignalEpoch gen_epoch(Stage stage, const SpectrumTable& table, const ShiftSpec& shift, std::uint64_t seed) {
  shift.validate();
  const auto& spec = table.at(stage);
  Rng rng(seed);
  edf::SignalEpoch e;
  e.samples.assign(kEpochSamples, 0.0);
  e.label = stage;
  const int k = table.sinusoids_per_band;
  const double dt = 1.0 / kTargetRateHz;
  for (const auto& band : spec.components) {
    // Equal split of the band's power across its sinusoids.
    const double amp = band.amplitude * shift.amplitude_scale / std::sqrt(static_cast<double>(k));
    for (int s = 0; s < k; ++s) {
      const double f = rng.uniform(band.f_lo, band.f_hi) + shift.frequency_drift;
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double w = 2.0 * std::numbers::pi * f * dt;
      for (std::size_t t = 0; t < kEpochSamples; ++t) {
        e.samples[t] += amp * std::sin(w * static_cast<double>(t) + phase);
      }
    }
  }
  const double sigma = spec.noise_sigma + shift.noise_sigma_delta;
  for (auto& v : e.samples) v = shift.channel_gain * (v + sigma * rng.normal());
  return e;
}

edf::EpochDataset gen_domain(const DomainRequest& request) {
  if (request.n_per_class < 1) throw InvalidArgument("gen_domain: n_per_class must be >= 1");
  request.table.validate();
  request.shift.validate();
  const std::string subject = request.subject_id.empty() ? "synth-" + std::to_string(request.seed) : request.subject_id;

  edf::EpochDataset ds;
  ds.domain = request.domain;
  const std::size_t total = static_cast<std::size_t>(request.n_per_class) * kNumStages;
  ds.epochs.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const Stage stage = kAllStages[i % kNumStages];
    auto e = gen_epoch(stage, request.table, request.shift, epoch_seed(request.seed, i));
    e.subject_id = subject;
    e.index = static_cast<int>(i);
    e.domain = request.domain;
    ds.epochs.push_back(std::move(e));
  }
  ds.provenance.channel = "synthetic";
  ds.provenance.resampling = "none";
  ds.provenance.extra = {{"generator", "synth"},
                         {"table_version", request.table.version},
                         {"seed", request.seed},
                         {"n_per_class", request.n_per_class},
                         {"shift", request.shift.to_json()},
                         {"subject", subject}};
  ds.refresh_counts();
  return ds;
}

}  // namespace sleepalign::synth
