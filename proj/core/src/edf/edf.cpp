#include "sleepalign/edf/edf.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "../binary_io.hpp"

namespace sleepalign::edf {

namespace {

constexpr std::size_t kFixedHeaderBytes = 256;
constexpr std::size_t kSignalHeaderBytes = 256;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\0')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void malformed(const std::string& what) {
  throw ParseError(ParseError::Kind::kMalformedHeader, "malformed EDF header: " + what);
}

int parse_int_field(std::string_view raw, const std::string& field) {
  auto s = trim(raw);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    malformed(field + " is not an integer: '" + std::string(raw) + "'");
  }
  return value;
}

double parse_real_field(std::string_view raw, const std::string& field) {
  auto s = trim(raw);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
    malformed(field + " is not a number: '" + std::string(raw) + "'");
  }
  return value;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() > width) s.resize(width);
  s.append(width - s.size(), ' ');
  return s;
}

// Shortest %g rendering that fits an 8-character EDF field.
std::string format_number(double v) {
  char buf[32];
  for (int precision = 8; precision >= 1; --precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::string_view(buf).size() <= 8) return buf;
  }
  throw InvalidArgument("value does not fit an 8-character EDF field: " + std::to_string(v));
}

}  // namespace

double digital_to_physical(const SignalHeader& sig, int digital) {
  return static_cast<double>(digital - sig.digital_min) * sig.gain() + sig.physical_min;
}

EdfFile parse_edf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeaderBytes) {
    malformed("file is " + std::to_string(bytes.size()) + " bytes, shorter than the 256-byte fixed header");
  }
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::size_t pos = 0;
  auto take = [&](std::size_t n) {
    auto out = std::string(text.substr(pos, n));
    pos += n;
    return out;
  };

  EdfFile file;
  EdfHeader& h = file.header;
  h.version = take(8);
  h.patient_id = take(80);
  h.recording_id = take(80);
  h.start_date = take(8);
  h.start_time = take(8);
  h.header_bytes_raw = take(8);
  h.reserved = take(44);
  h.num_records_raw = take(8);
  h.record_duration_raw = take(8);
  h.num_signals_raw = take(4);

  if (trim(h.version) != "0") malformed("version field is '" + h.version + "', expected '0'");
  h.header_bytes = parse_int_field(h.header_bytes_raw, "header byte count");
  h.num_records = parse_int_field(h.num_records_raw, "number of data records");
  h.record_duration = parse_real_field(h.record_duration_raw, "record duration");
  const int ns = parse_int_field(h.num_signals_raw, "signal count");
  if (ns < 1) malformed("signal count must be >= 1, got " + std::to_string(ns));
  if (h.record_duration <= 0.0) malformed("record duration must be > 0");
  if (h.num_records < -1) malformed("number of data records is negative");

  const auto expected_header = kFixedHeaderBytes + kSignalHeaderBytes * static_cast<std::size_t>(ns);
  if (h.header_bytes < 0 || static_cast<std::size_t>(h.header_bytes) != expected_header) {
    malformed("header byte count " + std::to_string(h.header_bytes) + " inconsistent with " +
              std::to_string(ns) + " signals (expected " + std::to_string(expected_header) + ")");
  }
  if (bytes.size() < expected_header) {
    malformed("file ends inside the signal headers (" + std::to_string(bytes.size()) + " of " +
              std::to_string(expected_header) + " bytes)");
  }

  // Signal sub-headers are stored field-major: all labels, then all
  // transducers, and so on.
  h.signals.resize(static_cast<std::size_t>(ns));
  auto field_block = [&](std::size_t width, std::string SignalHeader::*member) {
    for (auto& sig : h.signals) sig.*member = take(width);
  };
  field_block(16, &SignalHeader::label);
  field_block(80, &SignalHeader::transducer);
  field_block(8, &SignalHeader::physical_dim);
  field_block(8, &SignalHeader::physical_min_raw);
  field_block(8, &SignalHeader::physical_max_raw);
  field_block(8, &SignalHeader::digital_min_raw);
  field_block(8, &SignalHeader::digital_max_raw);
  field_block(80, &SignalHeader::prefiltering);
  field_block(8, &SignalHeader::samples_raw);
  field_block(32, &SignalHeader::reserved);

  std::size_t record_samples = 0;
  for (std::size_t s = 0; s < h.signals.size(); ++s) {
    auto& sig = h.signals[s];
    const std::string tag = "signal " + std::to_string(s) + " ('" + std::string(trim(sig.label)) + "') ";
    sig.physical_min = parse_real_field(sig.physical_min_raw, tag + "physical minimum");
    sig.physical_max = parse_real_field(sig.physical_max_raw, tag + "physical maximum");
    sig.digital_min = parse_int_field(sig.digital_min_raw, tag + "digital minimum");
    sig.digital_max = parse_int_field(sig.digital_max_raw, tag + "digital maximum");
    sig.samples_per_record = parse_int_field(sig.samples_raw, tag + "samples per record");
    if (sig.digital_max == sig.digital_min) {
      throw ParseError(ParseError::Kind::kZeroDigitalRange,
                       "EDF " + tag + "has zero digital range (digital min = max = " +
                           std::to_string(sig.digital_min) + ")");
    }
    if (sig.digital_max < sig.digital_min) malformed(tag + "digital maximum below digital minimum");
    if (!(sig.physical_max > sig.physical_min)) malformed(tag + "physical maximum not above physical minimum");
    if (sig.samples_per_record < 1) malformed(tag + "samples per record must be >= 1");
    record_samples += static_cast<std::size_t>(sig.samples_per_record);
  }

  const std::size_t record_bytes = 2 * record_samples;
  const std::size_t data_bytes = bytes.size() - expected_header;
  if (h.num_records == -1) {
    // Unknown record count (recording interrupted): use the complete records.
    h.num_records = static_cast<int>(data_bytes / record_bytes);
  }
  const auto records = static_cast<std::size_t>(h.num_records);
  if (data_bytes < records * record_bytes) {
    const std::size_t complete = data_bytes / record_bytes;
    throw ParseError(ParseError::Kind::kTruncatedRecord,
                     "EDF data truncated: record " + std::to_string(complete) + " of " +
                         std::to_string(records) + " is incomplete (" + std::to_string(data_bytes) +
                         " data bytes, expected " + std::to_string(records * record_bytes) + ")");
  }

  file.signals.resize(h.signals.size());
  for (std::size_t s = 0; s < h.signals.size(); ++s) {
    auto& out = file.signals[s];
    out.label = std::string(trim(h.signals[s].label));
    out.sample_rate_hz = h.signals[s].samples_per_record / h.record_duration;
    out.samples.reserve(records * static_cast<std::size_t>(h.signals[s].samples_per_record));
  }

  const std::uint8_t* p = bytes.data() + expected_header;
  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t s = 0; s < h.signals.size(); ++s) {
      const auto& sig = h.signals[s];
      auto& samples = file.signals[s].samples;
      for (int k = 0; k < sig.samples_per_record; ++k) {
        const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
        p += 2;
        const int digital = std::clamp<int>(raw, sig.digital_min, sig.digital_max);
        samples.push_back(digital_to_physical(sig, digital));
      }
    }
  }
  return file;
}

EdfFile read_edf_file(const std::string& path) {
  const std::string data = detail::read_file(path);
  return parse_edf(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::vector<std::uint8_t> serialize_edf(const EdfFile& file) {
  const auto& h = file.header;
  if (file.signals.size() != h.signals.size()) {
    throw InvalidArgument("serialize_edf: header has " + std::to_string(h.signals.size()) +
                          " signals but " + std::to_string(file.signals.size()) + " sample arrays");
  }
  std::string out;
  out.reserve(256 + 256 * h.signals.size());
  out += pad(h.version, 8);
  out += pad(h.patient_id, 80);
  out += pad(h.recording_id, 80);
  out += pad(h.start_date, 8);
  out += pad(h.start_time, 8);
  out += pad(h.header_bytes_raw, 8);
  out += pad(h.reserved, 44);
  out += pad(h.num_records_raw, 8);
  out += pad(h.record_duration_raw, 8);
  out += pad(h.num_signals_raw, 4);
  auto field_block = [&](std::size_t width, const std::string SignalHeader::*member) {
    for (const auto& sig : h.signals) out += pad(sig.*member, width);
  };
  field_block(16, &SignalHeader::label);
  field_block(80, &SignalHeader::transducer);
  field_block(8, &SignalHeader::physical_dim);
  field_block(8, &SignalHeader::physical_min_raw);
  field_block(8, &SignalHeader::physical_max_raw);
  field_block(8, &SignalHeader::digital_min_raw);
  field_block(8, &SignalHeader::digital_max_raw);
  field_block(80, &SignalHeader::prefiltering);
  field_block(8, &SignalHeader::samples_raw);
  field_block(32, &SignalHeader::reserved);

  const auto records = static_cast<std::size_t>(std::max(h.num_records, 0));
  for (std::size_t s = 0; s < h.signals.size(); ++s) {
    const auto need = records * static_cast<std::size_t>(h.signals[s].samples_per_record);
    if (file.signals[s].samples.size() != need) {
      throw InvalidArgument("serialize_edf: signal " + std::to_string(s) + " has " +
                            std::to_string(file.signals[s].samples.size()) + " samples, header implies " +
                            std::to_string(need));
    }
  }
  std::vector<std::uint8_t> bytes(out.begin(), out.end());
  bytes.reserve(bytes.size() + 2 * records * 64);
  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t s = 0; s < h.signals.size(); ++s) {
      const auto& sig = h.signals[s];
      const auto spr = static_cast<std::size_t>(sig.samples_per_record);
      for (std::size_t k = 0; k < spr; ++k) {
        const double physical = file.signals[s].samples[r * spr + k];
        const double d = (physical - sig.physical_min) / sig.gain() + sig.digital_min;
        const long digital = std::clamp<long>(std::lround(d), sig.digital_min, sig.digital_max);
        const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(digital));
        bytes.push_back(static_cast<std::uint8_t>(u & 0xff));
        bytes.push_back(static_cast<std::uint8_t>(u >> 8));
      }
    }
  }
  return bytes;
}

EdfHeader make_header(const std::vector<SignalSpec>& specs, int num_records, double record_duration,
                      const std::string& patient_id, const std::string& recording_id,
                      const std::string& start_date, const std::string& start_time) {
  if (specs.empty()) throw InvalidArgument("make_header: at least one signal required");
  EdfHeader h;
  h.version = pad("0", 8);
  h.patient_id = pad(patient_id, 80);
  h.recording_id = pad(recording_id, 80);
  h.start_date = pad(start_date, 8);
  h.start_time = pad(start_time, 8);
  h.header_bytes = static_cast<int>(kFixedHeaderBytes + kSignalHeaderBytes * specs.size());
  h.header_bytes_raw = pad(std::to_string(h.header_bytes), 8);
  h.reserved = pad("", 44);
  h.num_records = num_records;
  h.num_records_raw = pad(std::to_string(num_records), 8);
  h.record_duration_raw = pad(format_number(record_duration), 8);
  h.record_duration = parse_real_field(h.record_duration_raw, "record duration");
  h.num_signals_raw = pad(std::to_string(specs.size()), 4);
  for (const auto& spec : specs) {
    SignalHeader sig;
    sig.label = pad(spec.label, 16);
    sig.transducer = pad("", 80);
    sig.physical_dim = pad(spec.physical_dim, 8);
    sig.physical_min_raw = pad(format_number(spec.physical_min), 8);
    sig.physical_max_raw = pad(format_number(spec.physical_max), 8);
    sig.digital_min_raw = pad(std::to_string(spec.digital_min), 8);
    sig.digital_max_raw = pad(std::to_string(spec.digital_max), 8);
    sig.prefiltering = pad("", 80);
    sig.samples_raw = pad(std::to_string(spec.samples_per_record), 8);
    sig.reserved = pad("", 32);
    sig.physical_min = parse_real_field(sig.physical_min_raw, "physical minimum");
    sig.physical_max = parse_real_field(sig.physical_max_raw, "physical maximum");
    sig.digital_min = spec.digital_min;
    sig.digital_max = spec.digital_max;
    sig.samples_per_record = spec.samples_per_record;
    h.signals.push_back(std::move(sig));
  }
  return h;
}

std::string normalize_label(const std::string& label) {
  std::string out;
  for (unsigned char c : label) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::size_t find_channel(const EdfFile& file, const std::string& wanted) {
  const auto key = normalize_label(wanted);
  if (key.empty()) throw InvalidArgument("channel name is empty");
  // Exact normalized match wins over a suffix match ("EEG Fpz-Cz" vs "FPZ-CZ").
  for (std::size_t i = 0; i < file.signals.size(); ++i) {
    if (normalize_label(file.signals[i].label) == key) return i;
  }
  for (std::size_t i = 0; i < file.signals.size(); ++i) {
    const auto norm = normalize_label(file.signals[i].label);
    if (norm.size() > key.size() && norm.compare(norm.size() - key.size(), key.size(), key) == 0) return i;
  }
  std::string available;
  for (const auto& s : file.signals) {
    if (!available.empty()) available += ", ";
    available += "'" + s.label + "'";
  }
  throw InvalidArgument("channel '" + wanted + "' not found; available channels: " + available);
}

}  // namespace sleepalign::edf
