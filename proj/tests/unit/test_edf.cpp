#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sleepalign/edf/dataset.hpp"
#include "sleepalign/edf/edf.hpp"
#include "sleepalign/edf/labels.hpp"
#include "sleepalign/edf/resample.hpp"
#include "support/edf_fixture.hpp"
#include "support/oracles.hpp"

using namespace sleepalign;
using edf::ParseError;

namespace {

edf::RawSignal flat_signal(std::size_t n, double value = 1.0) {
  edf::RawSignal s;
  s.label = "EEG";
  s.sample_rate_hz = 100.0;
  s.samples.assign(n, value);
  return s;
}

ParseError::Kind parse_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    edf::parse_edf(bytes);
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ParseError";
  return ParseError::Kind::kMalformedHeader;
}

void set_field(std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& value, std::size_t width) {
  const auto f = fixture::field(value, width);
  std::copy(f.begin(), f.end(), bytes.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace

TEST(EdfParse, FixtureHeaderAndSamples) {
  const auto bytes = fixture::standard_edf(10);
  ASSERT_EQ(bytes.size(), 768u + 10u * 2u * 100u * 2u);
  const auto f = edf::parse_edf(bytes);
  EXPECT_EQ(f.header.num_records, 10);
  EXPECT_EQ(f.header.record_duration, 1.0);
  EXPECT_EQ(f.header.header_bytes, 768);
  EXPECT_EQ(f.header.start_time, "22.30.00");
  ASSERT_EQ(f.signals.size(), 2u);
  EXPECT_EQ(f.signals[0].label, "EEG Fpz-Cz");
  EXPECT_EQ(f.signals[1].label, "EEG Pz-Oz");
  EXPECT_EQ(f.header.signals[0].digital_min, -2048);
  EXPECT_EQ(f.header.signals[1].physical_max, 500.0);
  for (const auto& s : f.signals) {
    EXPECT_EQ(s.samples.size(), 1000u);
    EXPECT_EQ(s.sample_rate_hz, 100.0);
  }
  // physical = (d - dmin) * gain + pmin with gain = (pmax - pmin) / (dmax - dmin)
  const double gain0 = 200.0 / 4095.0, gain1 = 1000.0 / 65535.0;
  for (int r = 0; r < 10; ++r) {
    for (int k = 0; k < 100; ++k) {
      const double d0 = fixture::eeg_digital(r, k), d1 = fixture::aux_digital(r, k);
      EXPECT_DOUBLE_EQ(f.signals[0].samples[r * 100 + k], (d0 + 2048.0) * gain0 - 100.0);
      EXPECT_DOUBLE_EQ(f.signals[1].samples[r * 100 + k], (d1 + 32768.0) * gain1 - 500.0);
    }
  }
}

TEST(EdfParse, DigitalEndpointsMapExactly) {
  const auto f = edf::parse_edf(fixture::standard_edf(1));
  const auto& sig = f.header.signals[0];
  EXPECT_EQ(edf::digital_to_physical(sig, sig.digital_min), sig.physical_min);
  EXPECT_EQ(edf::digital_to_physical(sig, sig.digital_max), sig.physical_max);
  // eeg_digital(0, 0) is the digital minimum.
  EXPECT_EQ(f.signals[0].samples[0], -100.0);
}

TEST(EdfParse, ScalingIsMonotone) {
  const auto f = edf::parse_edf(fixture::standard_edf(1));
  const auto& sig = f.header.signals[1];
  double prev = -INFINITY;
  for (int d = sig.digital_min; d <= sig.digital_max; d += 97) {
    const double p = edf::digital_to_physical(sig, d);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(EdfParse, SerializeIsBitIdentical) {
  for (int records : {1, 10, 45}) {
    const auto bytes = fixture::standard_edf(records);
    EXPECT_EQ(edf::serialize_edf(edf::parse_edf(bytes)), bytes);
  }
}

TEST(EdfParse, TruncatedRecordNamesIndex) {
  auto bytes = fixture::standard_edf(10);
  bytes.resize(bytes.size() - 150);
  EXPECT_EQ(parse_kind(bytes), ParseError::Kind::kTruncatedRecord);
  try {
    edf::parse_edf(bytes);
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("record 9"), std::string::npos) << e.what();
  }
}

TEST(EdfParse, MalformedHeaders) {
  auto count = fixture::standard_edf(2);
  set_field(count, 236, "ten", 8);
  EXPECT_EQ(parse_kind(count), ParseError::Kind::kMalformedHeader);

  auto bytes_field = fixture::standard_edf(2);
  set_field(bytes_field, 184, "1024", 8);
  EXPECT_EQ(parse_kind(bytes_field), ParseError::Kind::kMalformedHeader);

  auto version = fixture::standard_edf(2);
  set_field(version, 0, "1", 8);
  EXPECT_EQ(parse_kind(version), ParseError::Kind::kMalformedHeader);

  EXPECT_EQ(parse_kind(std::vector<std::uint8_t>(100, ' ')), ParseError::Kind::kMalformedHeader);
}

TEST(EdfParse, ZeroDigitalRange) {
  auto sigs = fixture::standard_signals();
  sigs[1].digital_max = sigs[1].digital_min;
  EXPECT_EQ(parse_kind(fixture::build_edf(sigs, 2)), ParseError::Kind::kZeroDigitalRange);
}

TEST(EdfParse, UnknownRecordCountUsesCompleteRecords) {
  auto bytes = fixture::standard_edf(4);
  set_field(bytes, 236, "-1", 8);
  const auto f = edf::parse_edf(bytes);
  EXPECT_EQ(f.header.num_records, 4);
  EXPECT_EQ(f.signals[0].samples.size(), 400u);
}

TEST(EdfParse, OddRateFromDuration) {
  auto sigs = fixture::standard_signals();
  sigs.resize(1);
  sigs[0].samples_per_record = 250;
  const auto f = edf::parse_edf(fixture::build_edf(sigs, 2, "2"));
  EXPECT_EQ(f.signals[0].sample_rate_hz, 125.0);
}

TEST(EdfParse, MakeHeaderRoundTrip) {
  edf::EdfFile f;
  f.header = edf::make_header({{"EEG C4-A1", -250.0, 250.0, -32768, 32767, 125}}, 2, 1.0);
  edf::RawSignal s;
  s.label = "EEG C4-A1";
  s.sample_rate_hz = 125.0;
  for (int i = 0; i < 250; ++i) s.samples.push_back(200.0 * std::sin(i * 0.1));
  f.signals = {s};
  const auto bytes = edf::serialize_edf(f);
  const auto back = edf::parse_edf(bytes);
  EXPECT_EQ(back.signals[0].sample_rate_hz, 125.0);
  for (int i = 0; i < 250; ++i) EXPECT_NEAR(back.signals[0].samples[i], s.samples[i], 500.0 / 65535.0);
  EXPECT_EQ(edf::serialize_edf(back), bytes);
}

TEST(EdfChannels, LabelMatching) {
  const auto f = edf::parse_edf(fixture::standard_edf(1));
  EXPECT_EQ(edf::find_channel(f, "FPZ-CZ"), 0u);
  EXPECT_EQ(edf::find_channel(f, "eeg pz oz"), 1u);
  try {
    edf::find_channel(f, "C4-A1");
    FAIL() << "expected a missing-channel error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("EEG Fpz-Cz"), std::string::npos);
    EXPECT_NE(msg.find("EEG Pz-Oz"), std::string::npos);
  }
}

TEST(Labels, ExhaustiveTable) {
  const std::vector<std::pair<std::string, edf::MappedLabel>> table{
      {"W", Stage::kW},           {"1", Stage::kN1},
      {"2", Stage::kN2},          {"3", Stage::kN3},
      {"4", Stage::kN3},          {"R", Stage::kREM},
      {"MOVEMENT", std::nullopt}, {"UNKNOWN", std::nullopt},
      {"WAKE", Stage::kW},        {"N1", Stage::kN1},
      {"N2", Stage::kN2},         {"N3", Stage::kN3},
      {"N4", Stage::kN3},         {"REM", Stage::kREM},
      {"Sleep stage W", Stage::kW},  {"Sleep stage 1", Stage::kN1},
      {"Sleep stage 2", Stage::kN2}, {"Sleep stage 3", Stage::kN3},
      {"Sleep stage 4", Stage::kN3}, {"Sleep stage R", Stage::kREM},
      {"Sleep stage ?", std::nullopt}, {"Movement time", std::nullopt},
      {"?", std::nullopt},
  };
  EXPECT_EQ(edf::known_label_tokens().size(), table.size());
  for (const auto& [token, want] : table) EXPECT_EQ(edf::map_label(token), want) << token;
  for (const auto& token : edf::known_label_tokens()) {
    const auto got = edf::map_label(token);
    if (got) EXPECT_NE(stage_name(*got), "N4");
  }
}

TEST(Labels, CaseAndWhitespaceInsensitive) {
  EXPECT_EQ(edf::map_label("  rem "), Stage::kREM);
  EXPECT_EQ(edf::map_label("sleep   STAGE 4"), Stage::kN3);
  EXPECT_EQ(edf::map_label("movement"), std::nullopt);
}

TEST(Labels, UnknownTokenIsNamed) {
  try {
    edf::map_label("N5");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("N5"), std::string::npos);
  }
}

TEST(Labels, HypnogramParsing) {
  EXPECT_EQ(edf::parse_hypnogram("# night 1\nW\n\n2\r\nR\n"), std::vector<std::string>({"W", "2", "R"}));
  EXPECT_THROW(edf::read_hypnogram("/nonexistent/hypnogram.txt"), Error);
}

TEST(Resample, IdentityWhenRatesMatch) {
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.01 * i * i);
  EXPECT_EQ(edf::resample(x, 100.0, 100.0), x);
}

TEST(Resample, HalvingRate) {
  std::vector<double> x(2000, 1.0);
  EXPECT_EQ(edf::resample(x, 200.0, 100.0).size(), 1000u);
  EXPECT_EQ(edf::resample(std::vector<double>(1001, 0.0), 200.0, 100.0).size(), 501u);
}

TEST(Resample, TenHertzPeakSurvives125To100) {
  std::vector<double> x(1250);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * M_PI * 10.0 * i / 125.0);
  const auto y = edf::resample(x, 125.0, 100.0);
  ASSERT_EQ(y.size(), 1000u);
  const auto p = oracle::dft_power(y);
  const auto peak = std::max_element(p.begin(), p.end()) - p.begin();
  EXPECT_DOUBLE_EQ(static_cast<double>(peak) * 100.0 / 1000.0, 10.0);
}

TEST(Resample, PreservesInBandAmplitude) {
  std::vector<double> x(2500);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * M_PI * 5.0 * i / 250.0);
  const auto y = edf::resample(x, 250.0, 100.0);
  ASSERT_EQ(y.size(), 1000u);
  for (std::size_t i = 200; i < 800; ++i) EXPECT_NEAR(y[i], std::sin(2.0 * M_PI * 5.0 * i / 100.0), 1e-3);
}

TEST(Resample, RatioAndErrors) {
  const auto r = edf::rate_ratio(125.0, 100.0);
  EXPECT_EQ(r.up, 4);
  EXPECT_EQ(r.down, 5);
  EXPECT_THROW(edf::resample(std::vector<double>(10), 0.0, 100.0), Error);
  EXPECT_THROW(edf::resample(std::vector<double>(10), 100.0, -1.0), Error);
}

TEST(Segment, ThreeEpochs) {
  auto s = flat_signal(9000);
  for (std::size_t i = 0; i < s.samples.size(); ++i) s.samples[i] = static_cast<double>(i / 3000);
  const auto ds = edf::segment(s, {"W", "2", "3"}, Domain::kSource, "subj");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.epochs[1].label, Stage::kN2);
  EXPECT_EQ(ds.epochs[2].label, Stage::kN3);
  EXPECT_EQ(ds.epochs[2].samples.front(), 2.0);
  EXPECT_EQ(ds.epochs[0].samples.size(), 3000u);
  EXPECT_EQ(ds.class_counts[0] + ds.class_counts[2] + ds.class_counts[3], 3u);
}

TEST(Segment, DropsMovement) {
  const auto ds = edf::segment(flat_signal(9000), {"W", "MOVEMENT", "2"}, Domain::kSource, "s");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.epochs[0].index, 0);
  EXPECT_EQ(ds.epochs[1].index, 2);
}

TEST(Segment, TailDiscardedAndLogged) {
  const auto ds = edf::segment(flat_signal(9500), {"W", "1", "R"}, Domain::kTarget, "s");
  EXPECT_EQ(ds.size(), 3u);
  ASSERT_EQ(ds.provenance.log.size(), 1u);
  EXPECT_NE(ds.provenance.log[0].find("500-sample"), std::string::npos);
  EXPECT_EQ(ds.domain, Domain::kTarget);
}

TEST(Segment, LengthMismatchAndRate) {
  EXPECT_THROW(edf::segment(flat_signal(8999), {"W", "1", "R"}, Domain::kSource, "s"), Error);
  EXPECT_THROW(edf::segment(flat_signal(12000), {"W", "1", "R"}, Domain::kSource, "s"), Error);
  auto fast = flat_signal(9000);
  fast.sample_rate_hz = 125.0;
  EXPECT_THROW(edf::segment(fast, {"W", "1", "R"}, Domain::kSource, "s"), Error);
}

TEST(Segment, NonFiniteEpochDropped) {
  auto s = flat_signal(6000);
  s.samples[4000] = NAN;
  const auto ds = edf::segment(s, {"W", "2"}, Domain::kSource, "s");
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_FALSE(ds.provenance.log.empty());
}

TEST(Segment, ResamplePreservesDurationWithinOneEpoch) {
  edf::RawSignal s;
  s.label = "EEG";
  s.sample_rate_hz = 125.0;
  s.samples.assign(125 * 95, 0.0);
  const auto r = edf::resample(s);
  const std::size_t epochs = r.samples.size() / kEpochSamples;
  const auto ds = edf::segment(r, std::vector<std::string>(epochs, "2"), Domain::kSource, "s");
  EXPECT_LE(std::abs(95.0 - 30.0 * static_cast<double>(ds.size())), 30.0);
}

TEST(Dataset, FileRoundTripAndManifest) {
  auto ds = edf::segment(flat_signal(9000, 3.25), {"W", "R", "?"}, Domain::kSource, "subject-7");
  ds.provenance.files = {"a.edf"};
  ds.provenance.resampling = "none";
  const auto path = (std::filesystem::temp_directory_path() / "sleepalign_ds_test.bin").string();
  edf::write_dataset(ds, path);
  const auto back = edf::read_dataset(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.epochs[1].label, Stage::kREM);
  EXPECT_EQ(back.epochs[1].samples, ds.epochs[1].samples);
  EXPECT_EQ(back.epochs[0].subject_id, "subject-7");
  EXPECT_EQ(back.provenance.files, ds.provenance.files);
  const auto m = edf::dataset_manifest(back);
  EXPECT_EQ(m["class_counts"]["W"], 1);
  EXPECT_EQ(m["class_counts"]["REM"], 1);
  EXPECT_EQ(m["epochs"], 2);
  std::ofstream(path, std::ios::binary) << "garbage";
  EXPECT_THROW(edf::read_dataset(path), Error);
  std::filesystem::remove(path);
}

TEST(Dataset, HelpersKeepCountsConsistent) {
  const auto a = edf::segment(flat_signal(9000), {"W", "1", "2"}, Domain::kSource, "a");
  const auto b = edf::segment(flat_signal(6000), {"3", "R"}, Domain::kSource, "b");
  const auto all = edf::concat({a, b});
  EXPECT_EQ(all.size(), 5u);
  std::size_t total = 0;
  for (auto c : all.class_counts) total += c;
  EXPECT_EQ(total, 5u);
  EXPECT_EQ(all.subjects(), std::vector<std::string>({"a", "b"}));
  const auto stripped = edf::strip_labels(all);
  EXPECT_EQ(stripped.unlabeled_count, 5u);
  EXPECT_EQ(edf::subset(all, {4, 0}).epochs[0].label, Stage::kREM);
  auto t = b;
  t.domain = Domain::kTarget;
  for (auto& e : t.epochs) e.domain = Domain::kTarget;
  EXPECT_THROW(edf::concat({a, t}), Error);
}
