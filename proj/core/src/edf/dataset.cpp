#include "sleepalign/edf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "../binary_io.hpp"

namespace sleepalign::edf {

namespace {
constexpr std::string_view kDatasetMagic = "SLDSET01";
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void EpochDataset::refresh_counts() {
  class_counts.fill(0);
  unlabeled_count = 0;
  for (const auto& e : epochs) {
    if (e.domain != domain) {
      throw InvalidArgument("dataset mixes domain tags (epoch " + std::to_string(e.index) + " of '" +
                            e.subject_id + "' is " + std::string(domain_name(e.domain)) + ")");
    }
    if (e.label) {
      ++class_counts[static_cast<std::size_t>(*e.label)];
    } else {
      ++unlabeled_count;
    }
  }
}

std::vector<std::string> EpochDataset::subjects() const {
  std::set<std::string> ids;
  for (const auto& e : epochs) ids.insert(e.subject_id);
  return {ids.begin(), ids.end()};
}

EpochDataset segment_mapped(const RawSignal& signal, const std::vector<MappedLabel>& labels,
                            Domain domain, const std::string& subject_id) {
  if (std::abs(signal.sample_rate_hz - kTargetRateHz) > 1e-9) {
    throw InvalidArgument("segment: signal '" + signal.label + "' is at " +
                          std::to_string(signal.sample_rate_hz) + " Hz; resample to 100 Hz first");
  }
  const std::size_t needed = labels.size() * kEpochSamples;
  const std::size_t have = signal.samples.size();
  if (have < needed) {
    throw InvalidArgument("segment: " + std::to_string(labels.size()) + " labels need " +
                          std::to_string(needed) + " samples but signal has " + std::to_string(have));
  }
  if (have - needed >= kEpochSamples) {
    throw InvalidArgument("segment: signal has " + std::to_string(have) + " samples, more than one epoch beyond the " +
                          std::to_string(labels.size()) + " labelled epochs");
  }

  EpochDataset ds;
  ds.domain = domain;
  ds.provenance.channel = signal.label;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    const auto first = signal.samples.begin() + static_cast<std::ptrdiff_t>(i * kEpochSamples);
    SignalEpoch epoch;
    epoch.samples.assign(first, first + static_cast<std::ptrdiff_t>(kEpochSamples));
    if (!std::all_of(epoch.samples.begin(), epoch.samples.end(), [](double v) { return std::isfinite(v); })) {
      ds.provenance.log.push_back("dropped epoch " + std::to_string(i) + " of '" + subject_id +
                                  "': non-finite samples");
      continue;
    }
    epoch.label = labels[i];
    epoch.subject_id = subject_id;
    epoch.index = static_cast<int>(i);
    epoch.domain = domain;
    ds.epochs.push_back(std::move(epoch));
  }
  if (have > needed) {
    ds.provenance.log.push_back("discarded " + std::to_string(have - needed) + "-sample trailing partial epoch of '" +
                                subject_id + "'");
  }
  ds.refresh_counts();
  return ds;
}

EpochDataset segment(const RawSignal& signal, const std::vector<std::string>& tokens, Domain domain,
                     const std::string& subject_id) {
  std::vector<MappedLabel> labels;
  labels.reserve(tokens.size());
  for (const auto& t : tokens) labels.push_back(map_label(t));
  return segment_mapped(signal, labels, domain, subject_id);
}

EpochDataset concat(const std::vector<EpochDataset>& parts) {
  EpochDataset out;
  if (parts.empty()) return out;
  out.domain = parts.front().domain;
  out.provenance.channel = parts.front().provenance.channel;
  out.provenance.resampling = parts.front().provenance.resampling;
  out.provenance.extra = nlohmann::json::array();
  for (const auto& p : parts) {
    if (p.domain != out.domain) throw InvalidArgument("concat: datasets carry different domain tags");
    out.epochs.insert(out.epochs.end(), p.epochs.begin(), p.epochs.end());
    out.provenance.files.insert(out.provenance.files.end(), p.provenance.files.begin(), p.provenance.files.end());
    out.provenance.log.insert(out.provenance.log.end(), p.provenance.log.begin(), p.provenance.log.end());
    if (!p.provenance.extra.empty()) out.provenance.extra.push_back(p.provenance.extra);
  }
  out.refresh_counts();
  return out;
}

EpochDataset strip_labels(const EpochDataset& dataset) {
  EpochDataset out = dataset;
  for (auto& e : out.epochs) e.label.reset();
  out.refresh_counts();
  return out;
}

EpochDataset subset(const EpochDataset& dataset, const std::vector<std::size_t>& positions) {
  EpochDataset out;
  out.domain = dataset.domain;
  out.provenance = dataset.provenance;
  out.epochs.reserve(positions.size());
  for (auto p : positions) out.epochs.push_back(dataset.epochs.at(p));
  out.refresh_counts();
  return out;
}

nlohmann::json dataset_manifest(const EpochDataset& dataset) {
  nlohmann::json counts = nlohmann::json::object();
  for (auto s : kAllStages) counts[std::string(stage_name(s))] = dataset.class_counts[static_cast<std::size_t>(s)];
  nlohmann::json j;
  j["format"] = std::string(kDatasetMagic);
  j["domain"] = std::string(domain_name(dataset.domain));
  j["epochs"] = dataset.size();
  j["epoch_samples"] = kEpochSamples;
  j["sample_rate_hz"] = kTargetRateHz;
  j["class_counts"] = counts;
  j["unlabeled"] = dataset.unlabeled_count;
  j["subjects"] = dataset.subjects();
  j["provenance"] = {{"files", dataset.provenance.files},
                     {"channel", dataset.provenance.channel},
                     {"resampling", dataset.provenance.resampling},
                     {"log", dataset.provenance.log},
                     {"extra", dataset.provenance.extra}};
  return j;
}

void write_dataset(const EpochDataset& dataset, const std::string& path) {
  detail::ByteWriter w;
  w.bytes(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(dataset.domain));
  w.str(dataset_manifest(dataset)["provenance"].dump());
  w.u64(dataset.size());
  for (const auto& e : dataset.epochs) {
    w.i32(e.index);
    w.i32(e.label ? stage_index(*e.label) : -1);
    w.str(e.subject_id);
    w.u64(e.samples.size());
    for (double v : e.samples) w.f64(v);
  }
  detail::write_file(path, w.data());
}

EpochDataset read_dataset(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::ByteReader r(data, "dataset '" + path + "'");
  if (r.bytes(kDatasetMagic.size()) != kDatasetMagic) throw Error("'" + path + "' is not a sleepalign dataset file");
  const auto version = r.u32();
  if (version != kDatasetVersion) throw Error("'" + path + "': unsupported dataset version " + std::to_string(version));
  EpochDataset ds;
  ds.domain = static_cast<Domain>(r.u32());
  const auto prov = nlohmann::json::parse(r.str());
  ds.provenance.files = prov.at("files").get<std::vector<std::string>>();
  ds.provenance.channel = prov.at("channel").get<std::string>();
  ds.provenance.resampling = prov.at("resampling").get<std::string>();
  ds.provenance.log = prov.at("log").get<std::vector<std::string>>();
  ds.provenance.extra = prov.at("extra");
  const auto n = r.u64();
  ds.epochs.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    SignalEpoch e;
    e.index = r.i32();
    const auto label = r.i32();
    if (label >= 0) e.label = stage_from_index(label);
    e.subject_id = r.str();
    const auto count = r.u64();
    e.samples.resize(static_cast<std::size_t>(count));
    for (auto& v : e.samples) v = r.f64();
    e.domain = ds.domain;
    ds.epochs.push_back(std::move(e));
  }
  if (!r.at_end()) throw Error("'" + path + "': trailing bytes after last epoch");
  ds.refresh_counts();
  return ds;
}

}  // namespace sleepalign::edf
