#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/aligner/aligner.hpp"
#include "sleepalign/edf/dataset.hpp"
#include "sleepalign/nn/mrcnn.hpp"
#include "sleepalign/pipeline/metrics.hpp"

namespace sleepalign::pipeline {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  int patience = 0;  // epochs without held-out improvement before stopping; 0 = off
  nn::FeatureTap feature_tap = nn::FeatureTap::kConcat;
  double holdout_fraction = 0.1;
  // Fine-tuning runs `finetune_epochs` passes at learning_rate * finetune_lr_scale.
  int finetune_epochs = 5;
  double finetune_lr_scale = 0.1;
  int jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct TrainHistory {
  std::vector<double> train_loss;        // mean over steps, per epoch
  std::vector<double> holdout_accuracy;  // per epoch
  int best_epoch = -1;
  double best_holdout_accuracy = 0.0;
};

struct PretrainResult {
  nn::ModelParams model;
  TrainHistory history;
};

// Mini-batch SGD with seeded per-epoch shuffling. A seeded 10% split is held
// out and the parameters with the best held-out accuracy are returned.
PretrainResult pretrain(const edf::EpochDataset& source, const TrainConfig& config,
                        const nn::MrcnnConfig& model_config);

// Runs `epochs` passes of shuffled mini-batch SGD over `positions` of
// `dataset`, updating `model` in place. Returns the mean loss per pass.
std::vector<double> train_passes(nn::ModelParams& model, const edf::EpochDataset& dataset,
                                 std::vector<std::size_t> positions, int epochs, double lr,
                                 const TrainConfig& config, std::uint64_t stream);

// Plain fine-tuning on the given source positions.
nn::ModelParams finetune(const nn::ModelParams& model, const edf::EpochDataset& source,
                         const std::vector<std::size_t>& positions, const TrainConfig& config);

// Groups consecutive positions [0, n) into batches of `batch_size`.
std::vector<std::vector<std::size_t>> consecutive_batches(std::size_t n, std::size_t batch_size);

enum class FinetuneStatus { kOk, kEmptySelection };

struct SelectiveFinetuneResult {
  nn::ModelParams model;
  std::vector<aligner::BatchReward> rewards;
  aligner::Selection selection;
  FinetuneStatus status = FinetuneStatus::kOk;
  std::vector<std::size_t> selected_positions;
};

// Extracts features with the input model, scores every source batch against
// the target features, selects batches by `policy`, and fine-tunes on the
// selected batches' labelled epochs. Target labels are never read.
SelectiveFinetuneResult selective_finetune(const nn::ModelParams& model, const edf::EpochDataset& source,
                                           const std::vector<std::vector<std::size_t>>& source_batches,
                                           const edf::EpochDataset& target, const aligner::SelectionPolicy& policy,
                                           const aligner::SolverConfig& solver, const TrainConfig& config);

struct CrossValidation {
  std::vector<EvalReport> folds;
  std::vector<std::vector<std::string>> test_subjects;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
  double std_macro_f1 = 0.0;

  nlohmann::json to_json() const;
};

// Subject-wise k-fold: sorted subject ids are dealt round-robin to folds, so
// no subject appears in both the training and test side of a fold.
CrossValidation kfold_cv(const edf::EpochDataset& dataset, int k, const TrainConfig& config,
                         const nn::MrcnnConfig& model_config);

}  // namespace sleepalign::pipeline
