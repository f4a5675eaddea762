#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/aligner/aligner.hpp"
#include "sleepalign/edf/dataset.hpp"
#include "sleepalign/nn/mrcnn.hpp"
#include "sleepalign/pipeline/metrics.hpp"
#include "sleepalign/pipeline/train.hpp"
#include "sleepalign/synth/synth.hpp"

namespace sleepalign::pipeline {

// Synthetic transfer experiment with a known answer: the source is half
// "matched" (same generator as the target) and half shifted.
// Defaults for the planted experiment, tuned on seeds disjoint from the ones
// the acceptance run uses. Inputs are standardised per epoch so the shifted
// population cannot be told apart by amplitude alone.
inline TrainConfig planted_train_defaults() {
  TrainConfig t;
  t.epochs = 3;
  t.learning_rate = 0.03;
  t.finetune_epochs = 25;
  t.finetune_lr_scale = 0.1;
  return t;
}

inline nn::MrcnnConfig planted_model_defaults() {
  auto m = nn::MrcnnConfig::standard();
  m.zscore_input = true;
  return m;
}

struct PlantedConfig {
  int source_per_class = 40;  // per population
  int target_per_class = 40;
  std::size_t score_batch_size = 20;  // multiple of 5 keeps batches class-balanced
  synth::SpectrumTable table = synth::SpectrumTable::default_table();
  synth::ShiftSpec shift = synth::ShiftSpec::strong(synth::SpectrumTable::default_table().mean_noise_sigma());
  TrainConfig train = planted_train_defaults();
  nn::MrcnnConfig model = planted_model_defaults();
  aligner::SolverConfig solver;
  aligner::SelectionPolicy policy;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct PlantedFixture {
  edf::EpochDataset source;  // matched population first, then shifted
  edf::EpochDataset target;  // labelled; strip before adaptation
  std::vector<std::vector<std::size_t>> batches;
  std::vector<bool> batch_is_matched;
};

PlantedFixture planted_fixture(const PlantedConfig& config);

// Fraction of selected ids that are matched batches; 0 for an empty selection.
double selection_precision(const aligner::Selection& selection, const std::vector<bool>& batch_is_matched);

struct PlantedOutcome {
  nn::ModelParams pretrained;
  EvalReport no_adapt;
  EvalReport finetune_all;
  EvalReport selective;
  std::vector<aligner::BatchReward> rewards;
  aligner::Selection selection;  // under config.policy
  std::vector<bool> batch_is_matched;
  double median_tau = 0.0;
  double precision_at_median = 0.0;
  double precision_policy = 0.0;

  nlohmann::json to_json() const;
};

// Pretrain on the source union, then compare no adaptation, fine-tuning on
// every source batch, and selective fine-tuning, all scored on the target.
PlantedOutcome run_planted(const PlantedConfig& config);

}  // namespace sleepalign::pipeline
