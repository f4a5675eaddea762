#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sleepalign/common.hpp"

namespace sleepalign::edf {

class ParseError : public Error {
 public:
  enum class Kind { kMalformedHeader, kTruncatedRecord, kZeroDigitalRange };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Per-signal sub-header. Raw ASCII fields are retained alongside the parsed
// numbers so a parsed file can be written back byte for byte.
struct SignalHeader {
  std::string label;             // 16
  std::string transducer;        // 80
  std::string physical_dim;      // 8
  std::string physical_min_raw;  // 8
  std::string physical_max_raw;  // 8
  std::string digital_min_raw;   // 8
  std::string digital_max_raw;   // 8
  std::string prefiltering;      // 80
  std::string samples_raw;       // 8
  std::string reserved;          // 32

  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = 0;
  int digital_max = 0;
  int samples_per_record = 0;

  double gain() const {
    return (physical_max - physical_min) / static_cast<double>(digital_max - digital_min);
  }
  double offset() const { return physical_min - gain() * digital_min; }
};

struct EdfHeader {
  std::string version;             // 8
  std::string patient_id;          // 80
  std::string recording_id;        // 80
  std::string start_date;          // 8
  std::string start_time;          // 8
  std::string header_bytes_raw;    // 8
  std::string reserved;            // 44
  std::string num_records_raw;     // 8
  std::string record_duration_raw; // 8
  std::string num_signals_raw;     // 4

  int header_bytes = 0;
  int num_records = 0;
  double record_duration = 0.0;  // seconds
  std::vector<SignalHeader> signals;
};

struct RawSignal {
  std::string label;
  double sample_rate_hz = 0.0;
  std::vector<double> samples;  // physical units
};

struct EdfFile {
  EdfHeader header;
  std::vector<RawSignal> signals;
};

EdfFile parse_edf(std::span<const std::uint8_t> bytes);
EdfFile read_edf_file(const std::string& path);

// Re-quantizes physical samples with the header's linear map and emits the
// header fields verbatim.
std::vector<std::uint8_t> serialize_edf(const EdfFile& file);

// Physical value for a stored digital sample.
double digital_to_physical(const SignalHeader& sig, int digital);

// Builds a header with freshly formatted ASCII fields. Used for fixtures and
// for writing synthetic recordings.
struct SignalSpec {
  std::string label;
  double physical_min = -500.0;
  double physical_max = 500.0;
  int digital_min = -32768;
  int digital_max = 32767;
  int samples_per_record = 100;
  std::string physical_dim = "uV";
};
EdfHeader make_header(const std::vector<SignalSpec>& specs, int num_records,
                      double record_duration, const std::string& patient_id = "X",
                      const std::string& recording_id = "X",
                      const std::string& start_date = "01.01.00",
                      const std::string& start_time = "00.00.00");

// Case-insensitive, punctuation-stripped label match ("EEG Fpz-Cz" matches
// "FPZ-CZ"). Returns the signal index or throws naming the available labels.
std::size_t find_channel(const EdfFile& file, const std::string& wanted);
std::string normalize_label(const std::string& label);

}  // namespace sleepalign::edf
