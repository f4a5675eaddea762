#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/common.hpp"
#include "sleepalign/edf/edf.hpp"
#include "sleepalign/edf/labels.hpp"

namespace sleepalign::edf {

struct SignalEpoch {
  std::vector<double> samples;  // kEpochSamples values
  std::optional<Stage> label;   // empty = unlabeled
  std::string subject_id;
  int index = 0;
  Domain domain = Domain::kSource;
};

struct Provenance {
  std::vector<std::string> files;
  std::string channel;
  std::string resampling;  // e.g. "125->100 Hz (4/5)" or "none"
  std::vector<std::string> log;
  nlohmann::json extra = nlohmann::json::object();
};

struct EpochDataset {
  std::vector<SignalEpoch> epochs;
  std::array<std::size_t, kNumStages> class_counts{};
  std::size_t unlabeled_count = 0;
  Domain domain = Domain::kSource;
  Provenance provenance;

  std::size_t size() const { return epochs.size(); }
  bool empty() const { return epochs.empty(); }

  // Recomputes class_counts/unlabeled_count and checks the one-domain rule.
  void refresh_counts();
  std::vector<std::string> subjects() const;
};

// Consecutive non-overlapping 3000-sample epochs of a 100 Hz signal. Tokens
// that map to "drop" and epochs with non-finite samples are omitted; a partial
// trailing epoch is discarded and noted in the provenance log.
EpochDataset segment(const RawSignal& signal, const std::vector<std::string>& tokens,
                     Domain domain, const std::string& subject_id);

// Same, with labels already mapped (nullopt entries are dropped).
EpochDataset segment_mapped(const RawSignal& signal, const std::vector<MappedLabel>& labels,
                            Domain domain, const std::string& subject_id);

// Concatenates datasets that share a domain tag.
EpochDataset concat(const std::vector<EpochDataset>& parts);

// Copy with every label removed.
EpochDataset strip_labels(const EpochDataset& dataset);

// Subset by epoch position.
EpochDataset subset(const EpochDataset& dataset, const std::vector<std::size_t>& positions);

// Binary dataset file ("SLDSET01" + little-endian records) and JSON manifest.
void write_dataset(const EpochDataset& dataset, const std::string& path);
EpochDataset read_dataset(const std::string& path);
nlohmann::json dataset_manifest(const EpochDataset& dataset);

}  // namespace sleepalign::edf
