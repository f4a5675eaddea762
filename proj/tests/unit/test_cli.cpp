#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "cli/manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sleepalign::cli;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("sleepalign_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Invocation make(const std::string& sub, const fs::path& out, json flags = json::object()) {
  Invocation inv;
  inv.subcommand = sub;
  inv.out_dir = out.string();
  inv.flags = std::move(flags);
  inv.seed = 5;
  return inv;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Small synthetic source and target recordings written as EDF, shared by the
// end-to-end tests.
struct Recordings {
  fs::path root;
  fs::path source_edf, source_hyp, target_edf, target_hyp;
};

const Recordings& recordings() {
  static const Recordings r = [] {
    Recordings rec;
    rec.root = scratch("recordings");
    auto src = make("synth", rec.root / "src", {{"n_per_class", 4}, {"subject", "s0"}, {"write_edf", true}});
    run(src);
    auto tgt = make("synth", rec.root / "tgt",
                    {{"n_per_class", 2}, {"subject", "t0"}, {"domain", "target"}, {"write_edf", true}});
    tgt.seed = 6;
    run(tgt);
    rec.source_edf = rec.root / "src" / "recording.edf";
    rec.source_hyp = rec.root / "src" / "hypnogram.txt";
    rec.target_edf = rec.root / "tgt" / "recording.edf";
    rec.target_hyp = rec.root / "tgt" / "hypnogram.txt";
    return rec;
  }();
  return r;
}

json ingest_flags(const fs::path& edf, const fs::path& hyp, const std::string& subject) {
  return {{"edf", {edf.string()}}, {"hypnogram", {hyp.string()}}, {"subjects", {subject}}};
}

}  // namespace

TEST(CliConfig, OverridesParseAsJsonWithStringFallback) {
  json cfg = {{"train", {{"epochs", 1}}}};
  apply_override(cfg, "train.epochs=7");
  apply_override(cfg, "train.name=abc");
  apply_override(cfg, "policy.q=0.25");
  EXPECT_EQ(cfg["train"]["epochs"], 7);
  EXPECT_EQ(cfg["train"]["name"], "abc");
  EXPECT_DOUBLE_EQ(cfg["policy"]["q"].get<double>(), 0.25);
  EXPECT_THROW(apply_override(cfg, "novalue"), ConfigError);
}

TEST(CliConfig, PrecedenceIsDefaultsFileFlagsSet) {
  const auto dir = scratch("precedence");
  write_text(dir / "cfg.json", R"({"batch_size": 10, "policy": {"q": 0.2}})");
  Invocation inv = make("align", dir / "out", {{"checkpoint", "c"}, {"source", "s"}, {"target", "t"}, {"batch_size", 12}});
  inv.config_path = (dir / "cfg.json").string();
  inv.overrides = {"policy.q=0.4"};
  const auto cfg = resolve_config(inv);
  EXPECT_EQ(cfg["batch_size"], 12);
  EXPECT_DOUBLE_EQ(cfg["policy"]["q"].get<double>(), 0.4);
  EXPECT_EQ(cfg["policy"]["mode"], "top_quantile");
}

TEST(CliConfig, ErrorsNameTheOffendingKey) {
  const auto dir = scratch("errors");
  auto expect_key = [&](std::vector<std::string> overrides, const std::string& key) {
    Invocation inv = make("pretrain", dir / "out", {{"dataset", "d.sld"}});
    inv.overrides = std::move(overrides);
    try {
      resolve_config(inv);
      ADD_FAILURE() << "no error for " << key;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.path(), key);
      EXPECT_NE(std::string(e.what()).find("'" + key + "'"), std::string::npos) << e.what();
    }
  };
  expect_key({"train.epochs=abc"}, "train.epochs");
  expect_key({"train.bogus=1"}, "train.bogus");
  expect_key({"model.wide.kernel=[1]"}, "model.wide.kernel");

  Invocation missing = make("pretrain", dir / "out");
  EXPECT_THROW(resolve_config(missing), ConfigError);
}

TEST(CliConfig, TypedSectionsRethrowWithPath) {
  json train = default_train_json();
  train["epochs"] = 0;
  try {
    train_config(train, "train");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path().rfind("train", 0), 0u);
  }
  EXPECT_THROW(policy_config({{"mode", "sometimes"}, {"tau", 0.0}, {"q", 0.5}}, "policy"), ConfigError);
  EXPECT_THROW(solver_config([] {
                 auto s = default_solver_json();
                 s["solver"] = "magic";
                 return s;
               }(),
                             "solver"),
               ConfigError);
}

TEST(CliIngest, ManifestRecordsInputsAndRerunIsByteIdentical) {
  const auto& rec = recordings();
  const auto dir = scratch("ingest");
  const auto m1 = run(make("ingest", dir / "a", ingest_flags(rec.source_edf, rec.source_hyp, "s0")));
  const auto m2 = run(make("ingest", dir / "b", ingest_flags(rec.source_edf, rec.source_hyp, "s0")));
  for (const char* f : {"dataset.sld", "dataset.json"}) {
    EXPECT_EQ(read_text(dir / "a" / f), read_text(dir / "b" / f)) << f;
  }
  for (const char* key : {"subcommand", "config", "input_hashes", "outputs", "seed", "tool_version",
                          "wall_clock_seconds", "notes"}) {
    EXPECT_TRUE(m1.contains(key)) << key;
  }
  EXPECT_EQ(m1["subcommand"], "ingest");
  EXPECT_EQ(m1["seed"], 5);
  EXPECT_EQ(m1["input_hashes"], m2["input_hashes"]);
  EXPECT_EQ(m1["input_hashes"][rec.source_edf.string()], fnv1a_file(rec.source_edf));
  EXPECT_EQ(m1["notes"]["epochs"], 20);
  EXPECT_EQ(m1["outputs"].size(), 3u);
  const auto on_disk = json::parse(read_text(dir / "a" / "manifest.json"));
  EXPECT_EQ(on_disk, m1);
}

TEST(CliIngest, MissingChannelFailsAndLeavesNothingBehind) {
  const auto& rec = recordings();
  const auto dir = scratch("badchannel");
  auto flags = ingest_flags(rec.source_edf, rec.source_hyp, "s0");
  flags["channel"] = "EEG C3-A1";
  try {
    run(make("ingest", dir / "out", flags));
    FAIL();
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("EEG C3-A1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("EEG Fpz-Cz"), std::string::npos) << msg;
  }
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(CliIngest, MismatchedListsRejected) {
  const auto& rec = recordings();
  const auto dir = scratch("mismatch");
  auto flags = ingest_flags(rec.source_edf, rec.source_hyp, "s0");
  flags["hypnogram"] = json::array();
  EXPECT_ANY_THROW(run(make("ingest", dir / "out", flags)));
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(CliEndToEnd, AlignFinetuneEvalReport) {
  const auto& rec = recordings();
  const auto dir = scratch("e2e");
  run(make("ingest", dir / "src", ingest_flags(rec.source_edf, rec.source_hyp, "s0")));
  auto tflags = ingest_flags(rec.target_edf, rec.target_hyp, "t0");
  tflags["domain"] = "target";
  run(make("ingest", dir / "tgt", tflags));
  const auto src = (dir / "src" / "dataset.sld").string();
  const auto tgt = (dir / "tgt" / "dataset.sld").string();

  auto pre = make("pretrain", dir / "pre", {{"dataset", src}});
  pre.overrides = {"train.epochs=1", "train.batch_size=10"};
  run(pre);
  const auto ckpt = (dir / "pre" / "checkpoint.bin").string();
  EXPECT_TRUE(fs::exists(dir / "pre" / "history.json"));
  const auto sidecar = json::parse(read_text(dir / "pre" / "checkpoint.json"));
  EXPECT_EQ(sidecar["train"]["epochs"], 1);

  // Select-all policy marks every batch.
  auto all = make("align", dir / "align_all", {{"checkpoint", ckpt}, {"source", src}, {"target", tgt}, {"batch_size", 5}});
  all.overrides = {"policy.mode=all"};
  run(all);
  const auto rows = read_csv(dir / "align_all" / "scoring.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"batch_id", "emd", "reward", "selected", "solver"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][3], "1");

  // Scoring is reproducible and independent of --jobs.
  auto half = make("align", dir / "align_half", {{"checkpoint", ckpt}, {"source", src}, {"target", tgt}, {"batch_size", 5}});
  run(half);
  half.out_dir = (dir / "align_half2").string();
  half.jobs = 2;
  run(half);
  EXPECT_EQ(read_text(dir / "align_half" / "scoring.csv"), read_text(dir / "align_half2" / "scoring.csv"));
  const auto summary = json::parse(read_text(dir / "align_half" / "scoring.json"));
  EXPECT_EQ(summary["selected_ids"].size(), 2u);

  auto ft = make("finetune", dir / "ft", {{"checkpoint", ckpt}, {"source", src},
                                          {"scoring", (dir / "align_half" / "scoring.json").string()}});
  ft.overrides = {"train.finetune_epochs=1", "train.batch_size=10"};
  const auto ftm = run(ft);
  EXPECT_EQ(ftm["notes"]["selection"], summary["selected_ids"]);
  EXPECT_NE(read_text(dir / "ft" / "checkpoint.bin"), read_text(ckpt));

  // A scoring file from a different source is refused.
  auto wrong = make("finetune", dir / "ft_wrong", {{"checkpoint", ckpt}, {"source", tgt},
                                                   {"scoring", (dir / "align_half" / "scoring.json").string()}});
  EXPECT_THROW(run(wrong), ConfigError);
  EXPECT_FALSE(fs::exists(dir / "ft_wrong"));

  for (const auto& [name, path] : std::vector<std::pair<std::string, std::string>>{
           {"no-adapt", ckpt}, {"selective", (dir / "ft" / "checkpoint.bin").string()}}) {
    run(make("eval", dir / ("eval_" + name), {{"checkpoint", path}, {"dataset", tgt}, {"protocol", name}}));
    const auto report = json::parse(read_text(dir / ("eval_" + name) / "report.json"));
    const auto conf = read_csv(dir / ("eval_" + name) / "confusion.csv");
    ASSERT_EQ(conf.size(), 6u);
    long total = 0, diag = 0;
    for (std::size_t t = 1; t < conf.size(); ++t) {
      for (std::size_t p = 1; p < conf[t].size(); ++p) {
        total += std::stol(conf[t][p]);
        if (t == p) diag += std::stol(conf[t][p]);
      }
    }
    EXPECT_EQ(total, 10);
    EXPECT_NEAR(report["accuracy"].get<double>(), static_cast<double>(diag) / 10.0, 1e-4);
  }

  run(make("report", dir / "report",
           {{"reports", {(dir / "eval_no-adapt" / "report.json").string(), (dir / "eval_selective" / "report.json").string()}},
            {"features", {{"checkpoint", ckpt}, {"datasets", {src, tgt}}}}}));
  const auto table = read_csv(dir / "report" / "summary.csv");
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[1][0], "no-adapt");
  EXPECT_EQ(table[2][0], "selective");
  const auto pca = read_csv(dir / "report" / "pca.csv");
  EXPECT_EQ(pca.size(), 31u);
  const auto rs = json::parse(read_text(dir / "report" / "summary.json"));
  const auto ev = rs["pca_explained_variance"];
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_GE(ev[0].get<double>(), ev[1].get<double>());
  EXPECT_LE(ev[0].get<double>() + ev[1].get<double>(), 1.0 + 1e-9);
}

TEST(CliRun, UnknownSubcommandAndBadJobs) {
  const auto dir = scratch("misc");
  EXPECT_ANY_THROW(run(make("train", dir / "out")));
  auto inv = make("synth", dir / "out2");
  inv.jobs = 0;
  EXPECT_THROW(run(inv), ConfigError);
}
