#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "cli/config.hpp"
#include "cli/manifest.hpp"
#include "sleepalign/aligner/aligner.hpp"
#include "sleepalign/edf/dataset.hpp"
#include "sleepalign/edf/edf.hpp"
#include "sleepalign/edf/labels.hpp"
#include "sleepalign/edf/resample.hpp"
#include "sleepalign/nn/mrcnn.hpp"
#include "sleepalign/pipeline/metrics.hpp"
#include "sleepalign/pipeline/train.hpp"
#include "sleepalign/synth/synth.hpp"

namespace sleepalign::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<std::string> string_list(const json& cfg, const std::string& key) {
  std::vector<std::string> out;
  for (const auto& v : cfg.at(key)) {
    if (!v.is_string()) throw ConfigError(key, "expected a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

Domain domain_key(const json& cfg, const std::string& key) {
  try {
    return domain_from_name(cfg.at(key).get<std::string>());
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
}

nn::ModelParams load_checkpoint(const std::string& path) {
  return nn::deserialize_checkpoint(read_text(path));
}

std::string hypnogram_token(Stage s) {
  switch (s) {
    case Stage::kW: return "W";
    case Stage::kN1: return "1";
    case Stage::kN2: return "2";
    case Stage::kN3: return "3";
    case Stage::kREM: return "R";
  }
  return "?";
}

// Context shared by the command bodies.
struct Run {
  const Invocation& inv;
  json cfg;
  RunManifest manifest;
  OutputSet outputs;
  std::uint64_t seed;

  Run(const Invocation& i, json c)
      : inv(i), cfg(std::move(c)), outputs(i.out_dir), seed(i.seed.value_or(0)) {
    manifest.subcommand = i.subcommand;
    manifest.config = cfg;
    manifest.seed = seed;
  }

  void write_dataset(const edf::EpochDataset& ds) {
    edf::write_dataset(ds, outputs.declare("dataset.sld").string());
    write_text(outputs.declare("dataset.json"), dump(edf::dataset_manifest(ds)));
    json counts = json::object();
    for (auto s : kAllStages) counts[std::string(stage_name(s))] = ds.class_counts[static_cast<std::size_t>(s)];
    manifest.notes["class_counts"] = counts;
    manifest.notes["epochs"] = ds.size();
  }
};

void cmd_ingest(Run& run) {
  const auto edfs = string_list(run.cfg, "edf");
  const auto hyps = string_list(run.cfg, "hypnogram");
  auto subjects = string_list(run.cfg, "subjects");
  if (edfs.empty()) throw ConfigError("edf", "at least one EDF file is required");
  if (hyps.size() != edfs.size()) {
    throw ConfigError("hypnogram", "expected " + std::to_string(edfs.size()) + " hypnogram files, got " +
                                       std::to_string(hyps.size()));
  }
  if (!subjects.empty() && subjects.size() != edfs.size()) {
    throw ConfigError("subjects", "expected one subject id per EDF file");
  }
  const auto channel = run.cfg.at("channel").get<std::string>();
  const auto domain = domain_key(run.cfg, "domain");

  std::vector<edf::EpochDataset> parts;
  for (std::size_t i = 0; i < edfs.size(); ++i) {
    run.manifest.add_input(edfs[i]);
    run.manifest.add_input(hyps[i]);
    const auto file = edf::read_edf_file(edfs[i]);
    const auto& raw = file.signals[edf::find_channel(file, channel)];
    const auto signal = edf::resample(raw, kTargetRateHz);
    const auto subject = subjects.empty() ? fs::path(edfs[i]).stem().string() : subjects[i];
    auto part = edf::segment(signal, edf::read_hypnogram(hyps[i]), domain, subject);
    part.provenance.files = {edfs[i], hyps[i]};
    part.provenance.channel = raw.label;
    part.provenance.resampling = raw.sample_rate_hz == kTargetRateHz
                                     ? "none"
                                     : fixed4(raw.sample_rate_hz) + "->" + fixed4(kTargetRateHz) + " Hz";
    spdlog::info("ingest {}: {} epochs from channel '{}'", edfs[i], part.size(), raw.label);
    parts.push_back(std::move(part));
  }
  auto ds = edf::concat(parts);
  ds.domain = domain;
  run.write_dataset(ds);
}

void cmd_synth(Run& run) {
  synth::DomainRequest req;
  req.n_per_class = run.cfg.at("n_per_class").get<int>();
  const auto preset = run.cfg.at("preset").get<std::string>();
  if (!preset.empty()) {
    run.manifest.add_input(preset);
    try {
      req.table = synth::SpectrumTable::from_json(json::parse(read_text(preset)));
    } catch (const std::exception& e) {
      throw ConfigError("preset", e.what());
    }
  }
  try {
    req.shift = run.cfg.at("strong_shift").get<bool>() ? synth::ShiftSpec::strong(req.table.mean_noise_sigma())
                                                      : synth::ShiftSpec::from_json(run.cfg.at("shift"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("shift", e.what());
  }
  req.seed = run.seed;
  req.domain = domain_key(run.cfg, "domain");
  req.subject_id = run.cfg.at("subject").get<std::string>();
  if (req.n_per_class < 1) throw ConfigError("n_per_class", "must be >= 1");
  const auto ds = synth::gen_domain(req);
  run.write_dataset(ds);

  if (run.cfg.at("write_edf").get<bool>()) {
    // One 30 s epoch per 30 one-second records, plus a token-per-line hypnogram.
    edf::SignalSpec spec;
    spec.label = "EEG Fpz-Cz";
    const int records = static_cast<int>(ds.size() * 30);
    edf::EdfFile file;
    file.header = edf::make_header({spec}, records, 1.0, "X X X synthetic", "Startdate X X X synth");
    edf::RawSignal sig;
    sig.label = spec.label;
    sig.sample_rate_hz = kTargetRateHz;
    std::string hyp;
    for (const auto& e : ds.epochs) {
      for (double v : e.samples) {
        if (v < spec.physical_min || v > spec.physical_max) {
          throw Error("synthetic sample " + fixed4(v) + " exceeds the EDF physical range");
        }
      }
      sig.samples.insert(sig.samples.end(), e.samples.begin(), e.samples.end());
      hyp += hypnogram_token(*e.label) + "\n";
    }
    file.signals.push_back(std::move(sig));
    const auto bytes = edf::serialize_edf(file);
    write_text(run.outputs.declare("recording.edf"), std::string(bytes.begin(), bytes.end()));
    write_text(run.outputs.declare("hypnogram.txt"), hyp);
  }
}

// checkpoint.bin plus its JSON sidecar (layer shapes and the training config).
void write_checkpoint(Run& run, const nn::ModelParams& model, const pipeline::TrainConfig& train) {
  write_text(run.outputs.declare("checkpoint.bin"), nn::serialize_checkpoint(model));
  auto sidecar = nn::checkpoint_sidecar(model);
  sidecar["train"] = train.to_json();
  sidecar["train"].erase("jobs");
  write_text(run.outputs.declare("checkpoint.json"), dump(sidecar));
}

void cmd_pretrain(Run& run) {
  const auto path = run.cfg.at("dataset").get<std::string>();
  run.manifest.add_input(path);
  auto train = train_config(run.cfg.at("train"), "train");
  train.seed = run.seed;
  train.jobs = run.inv.jobs;
  const auto model = model_config(run.cfg.at("model"), "model");
  const auto ds = edf::read_dataset(path);
  spdlog::info("pretrain on {} epochs for up to {} passes", ds.size(), train.epochs);
  const auto result = pipeline::pretrain(ds, train, model);
  write_checkpoint(run, result.model, train);
  json hist = {{"best_epoch", result.history.best_epoch},
               {"best_holdout_accuracy", pipeline::round4(result.history.best_holdout_accuracy)},
               {"train_loss", json::array()},
               {"holdout_accuracy", json::array()}};
  for (double v : result.history.train_loss) hist["train_loss"].push_back(pipeline::round4(v));
  for (double v : result.history.holdout_accuracy) hist["holdout_accuracy"].push_back(pipeline::round4(v));
  write_text(run.outputs.declare("history.json"), dump(hist));
}

void cmd_align(Run& run) {
  const auto ckpt = run.cfg.at("checkpoint").get<std::string>();
  const auto source_path = run.cfg.at("source").get<std::string>();
  const auto target_path = run.cfg.at("target").get<std::string>();
  for (const auto& p : {ckpt, source_path, target_path}) run.manifest.add_input(p);
  const auto batch_size = run.cfg.at("batch_size").get<int>();
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  auto solver = solver_config(run.cfg.at("solver"), "solver");
  solver.seed = run.seed;
  solver.jobs = run.inv.jobs;
  const auto policy = policy_config(run.cfg.at("policy"), "policy");

  const auto model = load_checkpoint(ckpt);
  const auto source = edf::read_dataset(source_path);
  // Target labels are never looked at.
  const auto target = edf::strip_labels(edf::read_dataset(target_path));
  std::vector<int> labels;
  for (const auto& e : source.epochs) {
    if (!e.label) throw Error("source dataset '" + source_path + "' has unlabeled epochs");
    labels.push_back(stage_index(*e.label));
  }
  const auto fs_src = nn::extract_features(model, source, run.inv.jobs);
  const auto fs_tgt = nn::extract_features(model, target, run.inv.jobs);
  const auto batches = aligner::make_batches(fs_src, labels, static_cast<std::size_t>(batch_size));
  const auto rewards = aligner::score_batches(batches, fs_tgt, solver);
  const auto selection = aligner::select(rewards, policy);
  spdlog::info("align: {} of {} batches selected", selection.batch_ids.size(), rewards.size());

  write_text(run.outputs.declare("scoring.csv"), aligner::scoring_csv(rewards, selection));
  auto summary = aligner::scoring_summary(rewards, selection, policy, solver);
  summary["batch_size"] = batch_size;
  summary["source_epochs"] = source.size();
  write_text(run.outputs.declare("scoring.json"), dump(summary));
}

void cmd_finetune(Run& run) {
  const auto ckpt = run.cfg.at("checkpoint").get<std::string>();
  const auto source_path = run.cfg.at("source").get<std::string>();
  const auto scoring = run.cfg.at("scoring").get<std::string>();
  run.manifest.add_input(ckpt);
  run.manifest.add_input(source_path);
  auto train = train_config(run.cfg.at("train"), "train");
  train.seed = run.seed;
  train.jobs = run.inv.jobs;
  const auto model = load_checkpoint(ckpt);
  const auto source = edf::read_dataset(source_path);

  std::vector<std::size_t> positions;
  if (scoring.empty()) {
    positions.resize(source.size());
    std::iota(positions.begin(), positions.end(), 0);
    run.manifest.notes["selection"] = "all";
  } else {
    run.manifest.add_input(scoring);
    const auto summary = json::parse(read_text(scoring));
    const auto batch_size = summary.at("batch_size").get<std::size_t>();
    if (summary.at("source_epochs").get<std::size_t>() != source.size()) {
      throw ConfigError("scoring", "was computed for a source of " + summary.at("source_epochs").dump() +
                                       " epochs, not " + std::to_string(source.size()));
    }
    const auto batches = pipeline::consecutive_batches(source.size(), batch_size);
    for (int id : summary.at("selected_ids")) {
      for (auto p : batches.at(static_cast<std::size_t>(id))) positions.push_back(p);
    }
    std::sort(positions.begin(), positions.end());
    run.manifest.notes["selection"] = summary.at("selected_ids");
  }
  nn::ModelParams tuned = model;
  if (positions.empty()) {
    spdlog::warn("finetune: empty selection, writing the input model unchanged");
    run.manifest.notes["status"] = "empty_selection";
  } else {
    spdlog::info("finetune on {} epochs", positions.size());
    tuned = pipeline::finetune(model, source, positions, train);
  }
  write_checkpoint(run, tuned, train);
}

void cmd_eval(Run& run) {
  const auto ckpt = run.cfg.at("checkpoint").get<std::string>();
  const auto path = run.cfg.at("dataset").get<std::string>();
  run.manifest.add_input(ckpt);
  run.manifest.add_input(path);
  const auto report = pipeline::evaluate(load_checkpoint(ckpt), edf::read_dataset(path),
                                         run.cfg.at("protocol").get<std::string>(), run.seed, run.inv.jobs);
  spdlog::info("eval: accuracy {} macro-F1 {}", fixed4(report.accuracy), fixed4(report.macro_f1));
  write_text(run.outputs.declare("report.json"), dump(report.to_json()));
  write_text(run.outputs.declare("confusion.csv"), report.confusion_csv());
}

void cmd_report(Run& run) {
  const auto reports = string_list(run.cfg, "reports");
  if (reports.empty()) throw ConfigError("reports", "at least one report is required");
  json rows = json::array();
  std::string csv = "name,accuracy,macro_f1,total\n";
  for (const auto& path : reports) {
    run.manifest.add_input(path);
    const auto r = json::parse(read_text(path));
    auto name = r.value("protocol", std::string());
    if (name.empty()) name = fs::path(path).parent_path().filename().string();
    const double acc = r.at("accuracy").get<double>(), f1 = r.at("macro_f1").get<double>();
    rows.push_back({{"name", name}, {"accuracy", acc}, {"macro_f1", f1}, {"total", r.at("total")}, {"path", path}});
    csv += name + "," + fixed4(acc) + "," + fixed4(f1) + "," + r.at("total").dump() + "\n";
  }
  json summary = {{"reports", rows}};

  const auto& feat = run.cfg.at("features");
  const auto ckpt = feat.at("checkpoint").get<std::string>();
  const auto datasets = string_list(feat, "datasets");
  if (!ckpt.empty() && !datasets.empty()) {
    // First two principal components of the feature map over all datasets.
    run.manifest.add_input(ckpt);
    const auto model = load_checkpoint(ckpt);
    std::vector<nn::FeatureSet> sets;
    std::vector<edf::EpochDataset> data;
    for (const auto& p : datasets) {
      run.manifest.add_input(p);
      data.push_back(edf::read_dataset(p));
      sets.push_back(nn::extract_features(model, data.back(), run.inv.jobs));
    }
    const auto dim = static_cast<Eigen::Index>(sets.front().dim);
    Eigen::Index rows_total = 0;
    for (const auto& s : sets) rows_total += static_cast<Eigen::Index>(s.rows);
    Eigen::MatrixXd x(rows_total, dim);
    Eigen::Index r = 0;
    for (const auto& s : sets) {
      for (std::size_t i = 0; i < s.rows; ++i, ++r) {
        for (Eigen::Index d = 0; d < dim; ++d) x(r, d) = s.values[i * s.dim + static_cast<std::size_t>(d)];
      }
    }
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd cov = (x.transpose() * x) / std::max<double>(1.0, static_cast<double>(rows_total - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::Index k = std::min<Eigen::Index>(2, dim);
    Eigen::MatrixXd basis = eig.eigenvectors().rightCols(k).rowwise().reverse();
    // Fix the sign so the largest-magnitude loading is positive.
    for (Eigen::Index c = 0; c < k; ++c) {
      Eigen::Index arg;
      basis.col(c).cwiseAbs().maxCoeff(&arg);
      if (basis(arg, c) < 0) basis.col(c) *= -1.0;
    }
    const Eigen::MatrixXd proj = x * basis;
    std::string pca = "dataset,subject,index,label,pc1,pc2\n";
    r = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
      for (const auto& e : data[s].epochs) {
        pca += fs::path(datasets[s]).parent_path().filename().string() + "," + e.subject_id + "," +
               std::to_string(e.index) + "," + (e.label ? std::string(stage_name(*e.label)) : "") + "," +
               fixed4(proj(r, 0)) + "," + (k > 1 ? fixed4(proj(r, 1)) : fixed4(0.0)) + "\n";
        ++r;
      }
    }
    const double total_var = eig.eigenvalues().sum();
    json explained = json::array();
    for (Eigen::Index c = 0; c < k; ++c) {
      explained.push_back(pipeline::round4(total_var > 0 ? eig.eigenvalues()(dim - 1 - c) / total_var : 0.0));
    }
    summary["pca_explained_variance"] = explained;
    write_text(run.outputs.declare("pca.csv"), pca);
  }
  write_text(run.outputs.declare("summary.json"), dump(summary));
  write_text(run.outputs.declare("summary.csv"), csv);
}

using Body = void (*)(Run&);

const std::map<std::string, Body>& bodies() {
  static const std::map<std::string, Body> m = {{"ingest", cmd_ingest},     {"synth", cmd_synth},
                                                {"pretrain", cmd_pretrain}, {"align", cmd_align},
                                                {"finetune", cmd_finetune}, {"eval", cmd_eval},
                                                {"report", cmd_report}};
  return m;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"ingest", "synth", "pretrain", "align", "finetune", "eval", "report"};
  return names;
}

json default_config(const std::string& sub) {
  if (sub == "ingest") {
    return {{"edf", json::array()},
            {"hypnogram", json::array()},
            {"subjects", json::array()},
            {"channel", "EEG Fpz-Cz"},
            {"domain", "source"}};
  }
  if (sub == "synth") {
    return {{"n_per_class", 10},          {"preset", ""},       {"shift", synth::ShiftSpec{}.to_json()},
            {"strong_shift", false},      {"domain", "source"}, {"subject", ""},
            {"write_edf", false}};
  }
  if (sub == "pretrain") return {{"dataset", nullptr}, {"train", default_train_json()}, {"model", default_model_json()}};
  if (sub == "align") {
    return {{"checkpoint", nullptr}, {"source", nullptr},           {"target", nullptr},
            {"batch_size", 64},      {"solver", default_solver_json()}, {"policy", default_policy_json()}};
  }
  if (sub == "finetune") {
    return {{"checkpoint", nullptr}, {"source", nullptr}, {"scoring", ""}, {"train", default_train_json()}};
  }
  if (sub == "eval") return {{"checkpoint", nullptr}, {"dataset", nullptr}, {"protocol", ""}};
  if (sub == "report") {
    return {{"reports", json::array()}, {"features", {{"checkpoint", ""}, {"datasets", json::array()}}}};
  }
  throw Error("unknown subcommand '" + sub + "'");
}

json resolve_config(const Invocation& inv) {
  const auto defaults = default_config(inv.subcommand);
  json cfg = defaults;
  merge_into(cfg, load_config_file(inv.config_path));
  merge_into(cfg, inv.flags);
  for (const auto& o : inv.overrides) apply_override(cfg, o);
  validate_shape(defaults, cfg);
  return cfg;
}

json run(const Invocation& inv) {
  const auto t0 = std::chrono::steady_clock::now();
  if (inv.jobs < 1) throw ConfigError("", "--jobs must be >= 1");
  Run r(inv, resolve_config(inv));
  bodies().at(inv.subcommand)(r);
  const auto manifest_path = r.outputs.declare("manifest.json");
  r.manifest.outputs = r.outputs.paths();
  r.manifest.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(manifest_path, dump(r.manifest.to_json()));
  r.outputs.verify();
  r.outputs.commit();
  return r.manifest.to_json();
}

}  // namespace sleepalign::cli
