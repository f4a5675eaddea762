#pragma once
// EDF files assembled byte by byte from literal header fields, independent of
// the library's own header writer.

#include <cstdint>
#include <string>
#include <vector>

namespace fixture {

struct FixtureSignal {
  std::string label;
  std::string physical_min, physical_max, digital_min, digital_max;
  int samples_per_record;
  int (*digital)(int record, int k);  // stored value for sample k of a record
};

inline std::string field(const std::string& s, std::size_t width) {
  std::string out = s.substr(0, width);
  out.append(width - out.size(), ' ');
  return out;
}

inline std::vector<std::uint8_t> build_edf(const std::vector<FixtureSignal>& sigs, int records,
                                           const std::string& duration = "1") {
  std::string h;
  h += field("0", 8);
  h += field("X M 01-JAN-2000 fixture", 80);
  h += field("Startdate 01-JAN-2000 X fixture rig", 80);
  h += "01.01.00";
  h += "22.30.00";
  h += field(std::to_string(256 + 256 * sigs.size()), 8);
  h += field("", 44);
  h += field(std::to_string(records), 8);
  h += field(duration, 8);
  h += field(std::to_string(sigs.size()), 4);
  for (const auto& s : sigs) h += field(s.label, 16);
  for (std::size_t i = 0; i < sigs.size(); ++i) h += field("AgAgCl electrode", 80);
  for (std::size_t i = 0; i < sigs.size(); ++i) h += field("uV", 8);
  for (const auto& s : sigs) h += field(s.physical_min, 8);
  for (const auto& s : sigs) h += field(s.physical_max, 8);
  for (const auto& s : sigs) h += field(s.digital_min, 8);
  for (const auto& s : sigs) h += field(s.digital_max, 8);
  for (std::size_t i = 0; i < sigs.size(); ++i) h += field("HP:0.5Hz LP:100Hz", 80);
  for (const auto& s : sigs) h += field(std::to_string(s.samples_per_record), 8);
  for (std::size_t i = 0; i < sigs.size(); ++i) h += field("", 32);

  std::vector<std::uint8_t> out(h.begin(), h.end());
  for (int r = 0; r < records; ++r) {
    for (const auto& s : sigs) {
      for (int k = 0; k < s.samples_per_record; ++k) {
        const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(s.digital(r, k)));
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
      }
    }
  }
  return out;
}

inline int eeg_digital(int r, int k) { return ((r * 100 + k) * 37) % 4096 - 2048; }
inline int aux_digital(int r, int k) { return ((r * 100 + k) * 131) % 65536 - 32768; }

// Two signals, `records` one-second records of 100 samples each.
inline std::vector<FixtureSignal> standard_signals() {
  return {{"EEG Fpz-Cz", "-100", "100", "-2048", "2047", 100, &eeg_digital},
          {"EEG Pz-Oz", "-500", "500", "-32768", "32767", 100, &aux_digital}};
}

inline std::vector<std::uint8_t> standard_edf(int records = 10) { return build_edf(standard_signals(), records); }

}  // namespace fixture
