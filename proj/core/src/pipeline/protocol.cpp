#include "sleepalign/pipeline/protocol.hpp"

#include <numeric>

#include "sleepalign/rng.hpp"

namespace sleepalign::pipeline {

void PlantedConfig::validate() const {
  if (source_per_class < 1 || target_per_class < 1) throw InvalidArgument("planted: per-class counts must be >= 1");
  if (score_batch_size == 0) throw InvalidArgument("planted: score_batch_size must be >= 1");
  if ((static_cast<std::size_t>(source_per_class) * kNumStages) % score_batch_size != 0) {
    throw InvalidArgument("planted: score_batch_size must divide each source population");
  }
  table.validate();
  shift.validate();
  train.validate();
  model.validate();
  policy.validate();
}

nlohmann::json PlantedConfig::to_json() const {
  return {{"source_per_class", source_per_class},
          {"target_per_class", target_per_class},
          {"score_batch_size", score_batch_size},
          {"table", table.to_json()},
          {"shift", shift.to_json()},
          {"train", train.to_json()},
          {"model", model.to_json()},
          {"solver", solver.to_json()},
          {"policy", policy.to_json()},
          {"seed", seed}};
}

PlantedFixture planted_fixture(const PlantedConfig& config) {
  config.validate();
  synth::DomainRequest matched{config.source_per_class, config.table, synth::ShiftSpec::identity(),
                               splitmix64(config.seed ^ 0x11ULL), Domain::kSource, ""};
  synth::DomainRequest shifted{config.source_per_class, config.table, config.shift, splitmix64(config.seed ^ 0x22ULL),
                               Domain::kSource, ""};
  synth::DomainRequest target{config.target_per_class, config.table, synth::ShiftSpec::identity(),
                              splitmix64(config.seed ^ 0x33ULL), Domain::kTarget, ""};
  PlantedFixture f;
  f.source = edf::concat({synth::gen_domain(matched), synth::gen_domain(shifted)});
  f.target = synth::gen_domain(target);
  f.batches = consecutive_batches(f.source.size(), config.score_batch_size);
  const std::size_t matched_rows = static_cast<std::size_t>(config.source_per_class) * kNumStages;
  for (const auto& b : f.batches) f.batch_is_matched.push_back(b.front() < matched_rows);
  return f;
}

double selection_precision(const aligner::Selection& selection, const std::vector<bool>& batch_is_matched) {
  if (selection.batch_ids.empty()) return 0.0;
  std::size_t hits = 0;
  for (int id : selection.batch_ids) {
    if (batch_is_matched.at(static_cast<std::size_t>(id))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(selection.batch_ids.size());
}

PlantedOutcome run_planted(const PlantedConfig& config) {
  const auto fx = planted_fixture(config);
  auto train_cfg = config.train;
  train_cfg.seed = config.seed;
  auto solver = config.solver;
  solver.seed = config.seed;

  PlantedOutcome out;
  out.batch_is_matched = fx.batch_is_matched;
  out.pretrained = pretrain(fx.source, train_cfg, config.model).model;
  out.no_adapt = evaluate(out.pretrained, fx.target, "planted/no-adapt", config.seed, train_cfg.jobs);

  std::vector<std::size_t> all(fx.source.size());
  std::iota(all.begin(), all.end(), 0);
  const auto tuned_all = finetune(out.pretrained, fx.source, all, train_cfg);
  out.finetune_all = evaluate(tuned_all, fx.target, "planted/finetune-all", config.seed, train_cfg.jobs);

  const auto unlabeled = edf::strip_labels(fx.target);
  const auto sel = selective_finetune(out.pretrained, fx.source, fx.batches, unlabeled, config.policy, solver, train_cfg);
  out.selective = evaluate(sel.model, fx.target, "planted/selective", config.seed, train_cfg.jobs);
  out.rewards = sel.rewards;
  out.selection = sel.selection;
  out.precision_policy = selection_precision(sel.selection, fx.batch_is_matched);

  out.median_tau = aligner::calibrate_threshold(out.rewards, aligner::ThresholdStrategy::median());
  const auto at_median = aligner::select(out.rewards, aligner::SelectionPolicy::absolute(out.median_tau));
  out.precision_at_median = selection_precision(at_median, fx.batch_is_matched);
  return out;
}

nlohmann::json PlantedOutcome::to_json() const {
  std::vector<int> matched;
  for (std::size_t b = 0; b < batch_is_matched.size(); ++b) {
    if (batch_is_matched[b]) matched.push_back(static_cast<int>(b));
  }
  return {{"no_adapt", no_adapt.to_json()},
          {"finetune_all", finetune_all.to_json()},
          {"selective", selective.to_json()},
          {"selected_ids", selection.batch_ids},
          {"matched_ids", matched},
          {"median_tau", round4(median_tau)},
          {"precision_at_median", round4(precision_at_median)},
          {"precision_policy", round4(precision_policy)}};
}

}  // namespace sleepalign::pipeline
