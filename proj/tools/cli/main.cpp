// sleepalign: file-in, file-out front end for the pipeline.
//
//   sleepalign <subcommand> [--config FILE] [--set key=value]... [--seed N] [--jobs N] --out DIR
//
// Log level comes from SLEEPALIGN_LOG_LEVEL (trace|debug|info|warn|error|off).

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli/commands.hpp"
#include "sleepalign/common.hpp"

using sleepalign::cli::Invocation;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sleepalign");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("SLEEPALIGN_LOG_LEVEL")) {
    const auto parsed = spdlog::level::from_str(lvl);
    // from_str maps unknown names to off; only honour "off" when asked for.
    if (parsed != spdlog::level::off || std::string(lvl) == "off") spdlog::set_level(parsed);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Selective transfer learning for sleep staging"};
  app.require_subcommand(1);

  Invocation inv;
  std::vector<std::string> edf, hyp, subjects, reports, feature_datasets;
  std::string channel, domain, dataset, checkpoint, source, target, scoring, protocol, preset, subject,
      feature_checkpoint;
  int n_per_class = 0;
  bool strong = false, write_edf = false;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", inv.overrides, "Override a config key (dotted.path=value)");
    sub->add_option("--seed", seed, "Seed for every stochastic step");
    sub->add_option("--jobs", inv.jobs, "Worker threads for batch-parallel work")->check(CLI::PositiveNumber);
    sub->add_option("--out", inv.out_dir, "Output directory")->required();
  };

  auto* ingest = app.add_subcommand("ingest", "EDF + hypnogram files to an epoch dataset");
  common(ingest);
  ingest->add_option("--edf", edf, "EDF recording (repeatable)");
  ingest->add_option("--hypnogram", hyp, "Hypnogram, one token per line (repeatable, same order)");
  ingest->add_option("--subject", subjects, "Subject id per recording");
  ingest->add_option("--channel", channel, "Channel label");
  ingest->add_option("--domain", domain, "source or target");

  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic domain");
  common(synth);
  synth->add_option("--n-per-class", n_per_class, "Epochs per stage");
  synth->add_option("--preset", preset, "Spectrum table JSON")->check(CLI::ExistingFile);
  synth->add_flag("--strong-shift", strong, "Apply the strong-shift preset");
  synth->add_option("--domain", domain, "source or target");
  synth->add_option("--subject", subject, "Subject id");
  synth->add_flag("--write-edf", write_edf, "Also write recording.edf and hypnogram.txt");

  auto* pretrain = app.add_subcommand("pretrain", "Train the network on a labelled source dataset");
  common(pretrain);
  pretrain->add_option("--dataset", dataset, "Source dataset file");

  auto* align = app.add_subcommand("align", "Score source batches against the target and select");
  common(align);
  align->add_option("--checkpoint", checkpoint, "Model checkpoint");
  align->add_option("--source", source, "Labelled source dataset");
  align->add_option("--target", target, "Target dataset (labels ignored)");

  auto* finetune = app.add_subcommand("finetune", "Fine-tune on the selected source batches");
  common(finetune);
  finetune->add_option("--checkpoint", checkpoint, "Model checkpoint");
  finetune->add_option("--source", source, "Labelled source dataset");
  finetune->add_option("--scoring", scoring, "scoring.json from align; omit to use every source epoch");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labelled dataset");
  common(eval);
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint");
  eval->add_option("--dataset", dataset, "Labelled dataset");
  eval->add_option("--protocol", protocol, "Name recorded in the report");

  auto* report = app.add_subcommand("report", "Tabulate eval reports, optionally with a feature PCA");
  common(report);
  report->add_option("--report", reports, "report.json from eval (repeatable)");
  report->add_option("--features-checkpoint", feature_checkpoint, "Checkpoint for the PCA");
  report->add_option("--features-dataset", feature_datasets, "Dataset for the PCA (repeatable)");

  CLI11_PARSE(app, argc, argv);

  auto* chosen = app.get_subcommands().front();
  inv.subcommand = chosen->get_name();
  if (chosen->get_option("--seed")->count() > 0) inv.seed = seed;
  auto& f = inv.flags;
  auto given = [&](const char* opt) {
    const auto* o = chosen->get_option_no_throw(opt);
    return o != nullptr && o->count() > 0;
  };
  auto set_if = [&](const char* opt, const char* key, const auto& value) {
    if (given(opt)) f[key] = value;
  };
  set_if("--edf", "edf", edf);
  set_if("--hypnogram", "hypnogram", hyp);
  set_if("--subject", inv.subcommand == "synth" ? "subject" : "subjects",
         inv.subcommand == "synth" ? nlohmann::json(subject) : nlohmann::json(subjects));
  set_if("--channel", "channel", channel);
  set_if("--domain", "domain", domain);
  set_if("--n-per-class", "n_per_class", n_per_class);
  set_if("--preset", "preset", preset);
  set_if("--strong-shift", "strong_shift", strong);
  set_if("--write-edf", "write_edf", write_edf);
  set_if("--dataset", "dataset", dataset);
  set_if("--checkpoint", "checkpoint", checkpoint);
  set_if("--source", "source", source);
  set_if("--target", "target", target);
  set_if("--scoring", "scoring", scoring);
  set_if("--protocol", "protocol", protocol);
  set_if("--report", "reports", reports);
  if (given("--features-checkpoint")) f["features"]["checkpoint"] = feature_checkpoint;
  if (given("--features-dataset")) f["features"]["datasets"] = feature_datasets;

  try {
    const auto manifest = sleepalign::cli::run(inv);
    spdlog::info("{}: wrote {} files to {}", inv.subcommand, manifest.at("outputs").size(), inv.out_dir);
    return 0;
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", inv.subcommand, e.what());
    return 1;
  }
}
