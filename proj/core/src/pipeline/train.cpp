#include "sleepalign/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "sleepalign/rng.hpp"

namespace sleepalign::pipeline {

namespace {

constexpr std::uint64_t kPretrainStream = 0x9e7a11ULL;
constexpr std::uint64_t kFinetuneStream = 0xf17e7a4eULL;
constexpr std::uint64_t kHoldoutStream = 0x4011d07ULL;

std::vector<int> labels_of(const edf::EpochDataset& ds, std::span<const std::size_t> positions) {
  std::vector<int> out;
  out.reserve(positions.size());
  for (auto p : positions) {
    const auto& e = ds.epochs.at(p);
    if (!e.label) throw InvalidArgument("training epoch " + std::to_string(e.index) + " of '" + e.subject_id + "' is unlabeled");
    out.push_back(stage_index(*e.label));
  }
  return out;
}

double accuracy_on(const nn::ModelParams& model, const edf::EpochDataset& ds, int jobs) {
  std::size_t correct = 0;
  const auto pred = nn::predict(model, ds, jobs);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (pred[i] == stage_index(*ds.epochs[i].label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("train.epochs must be >= 1 (got " + std::to_string(epochs) + ")");
  if (batch_size < 1) throw InvalidArgument("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train.learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train.weight_decay must be >= 0");
  if (patience < 0) throw InvalidArgument("train.patience must be >= 0");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw InvalidArgument("train.holdout_fraction must be in (0, 1)");
  if (finetune_epochs < 1) throw InvalidArgument("train.finetune_epochs must be >= 1");
  if (!(finetune_lr_scale > 0.0)) throw InvalidArgument("train.finetune_lr_scale must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"patience", patience},
          {"feature_tap", static_cast<int>(feature_tap)},
          {"holdout_fraction", holdout_fraction},
          {"finetune_epochs", finetune_epochs},
          {"finetune_lr_scale", finetune_lr_scale}};
}

std::vector<double> train_passes(nn::ModelParams& model, const edf::EpochDataset& dataset,
                                 std::vector<std::size_t> positions, int epochs, double lr,
                                 const TrainConfig& config, std::uint64_t stream) {
  std::vector<double> losses;
  if (positions.empty()) return losses;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<std::vector<double>> inputs;
  for (int ep = 0; ep < epochs; ++ep) {
    Rng rng(splitmix64(config.seed ^ stream) + static_cast<std::uint64_t>(ep));
    rng.shuffle(positions.begin(), positions.end());
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < positions.size(); start += bs) {
      const auto end = std::min(positions.size(), start + bs);
      const std::span<const std::size_t> chunk(positions.data() + start, end - start);
      inputs.clear();
      for (auto p : chunk) inputs.push_back(dataset.epochs[p].samples);
      const auto labels = labels_of(dataset, chunk);
      const auto g = nn::backward(model, inputs, labels, config.jobs);
      nn::sgd_step(model, g.gradients, lr, config.weight_decay);
      loss_sum += g.loss;
      ++steps;
    }
    losses.push_back(loss_sum / static_cast<double>(steps));
  }
  return losses;
}

PretrainResult pretrain(const edf::EpochDataset& source, const TrainConfig& config,
                        const nn::MrcnnConfig& model_config) {
  config.validate();
  if (source.size() < 2) throw InvalidArgument("pretrain: need at least 2 labelled epochs");
  std::set<int> classes;
  for (const auto& e : source.epochs) {
    if (!e.label) throw InvalidArgument("pretrain: source epochs must be labelled");
    classes.insert(stage_index(*e.label));
  }
  if (classes.size() < 2) throw InvalidArgument("pretrain: degenerate dataset with a single class");

  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(splitmix64(config.seed ^ kHoldoutStream));
  split_rng.shuffle(order.begin(), order.end());
  const auto n_hold = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(config.holdout_fraction * static_cast<double>(source.size()))), 1,
      source.size() - 1);
  std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::sort(hold.begin(), hold.end());
  std::sort(train.begin(), train.end());
  const auto holdout = edf::subset(source, hold);

  auto mc = model_config;
  mc.feature_tap = config.feature_tap;
  PretrainResult result{nn::ModelParams::initialize(mc, config.seed), {}};
  nn::ModelParams model = result.model;
  int since_best = 0;
  for (int ep = 0; ep < config.epochs; ++ep) {
    // One pass per call; the per-pass stream keeps shuffles distinct.
    const auto loss = train_passes(model, source, train, 1, config.learning_rate, config,
                                   kPretrainStream + static_cast<std::uint64_t>(ep) * 0x100000001ULL);
    const double acc = accuracy_on(model, holdout, config.jobs);
    result.history.train_loss.push_back(loss.front());
    result.history.holdout_accuracy.push_back(acc);
    if (result.history.best_epoch < 0 || acc > result.history.best_holdout_accuracy) {
      result.history.best_epoch = ep;
      result.history.best_holdout_accuracy = acc;
      result.model = model;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

nn::ModelParams finetune(const nn::ModelParams& model, const edf::EpochDataset& source,
                         const std::vector<std::size_t>& positions, const TrainConfig& config) {
  config.validate();
  nn::ModelParams out = model;
  train_passes(out, source, positions, config.finetune_epochs, config.learning_rate * config.finetune_lr_scale,
               config, kFinetuneStream);
  return out;
}

std::vector<std::vector<std::size_t>> consecutive_batches(std::size_t n, std::size_t batch_size) {
  if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> b;
    for (std::size_t k = start; k < std::min(n, start + batch_size); ++k) b.push_back(k);
    out.push_back(std::move(b));
  }
  return out;
}

SelectiveFinetuneResult selective_finetune(const nn::ModelParams& model, const edf::EpochDataset& source,
                                           const std::vector<std::vector<std::size_t>>& source_batches,
                                           const edf::EpochDataset& target, const aligner::SelectionPolicy& policy,
                                           const aligner::SolverConfig& solver, const TrainConfig& config) {
  config.validate();
  if (source_batches.empty()) throw InvalidArgument("selective_finetune: no source batches");
  if (target.empty()) throw InvalidArgument("selective_finetune: target dataset is empty");

  // Only the samples of the target are used; its labels stay untouched.
  const auto target_features = nn::extract_features(model, target, config.jobs);
  const auto source_features = nn::extract_features(model, source, config.jobs);

  std::vector<aligner::SourceBatch> batches;
  for (std::size_t b = 0; b < source_batches.size(); ++b) {
    aligner::SourceBatch sb;
    sb.id = static_cast<int>(b);
    sb.members = source_batches[b];
    sb.labels = labels_of(source, sb.members);
    sb.features = source_features.select_rows(sb.members);
    sb.features.batch_id = sb.id;
    batches.push_back(std::move(sb));
  }

  SelectiveFinetuneResult r{model, {}, {}, FinetuneStatus::kOk, {}};
  r.rewards = aligner::score_batches(batches, target_features, solver);
  r.selection = aligner::select(r.rewards, policy);
  if (r.selection.status == aligner::SelectionStatus::kEmptySelection) {
    r.status = FinetuneStatus::kEmptySelection;
    return r;
  }
  for (int id : r.selection.batch_ids) {
    const auto& members = batches[static_cast<std::size_t>(id)].members;
    r.selected_positions.insert(r.selected_positions.end(), members.begin(), members.end());
  }
  std::sort(r.selected_positions.begin(), r.selected_positions.end());
  r.model = finetune(model, source, r.selected_positions, config);
  return r;
}

CrossValidation kfold_cv(const edf::EpochDataset& dataset, int k, const TrainConfig& config,
                         const nn::MrcnnConfig& model_config) {
  if (k < 2) throw InvalidArgument("kfold_cv: k must be >= 2");
  const auto subjects = dataset.subjects();
  if (subjects.size() < static_cast<std::size_t>(k)) {
    throw InvalidArgument("kfold_cv: " + std::to_string(subjects.size()) + " subjects cannot fill " +
                          std::to_string(k) + " folds");
  }
  std::map<std::string, int> fold_of;
  for (std::size_t s = 0; s < subjects.size(); ++s) fold_of[subjects[s]] = static_cast<int>(s % static_cast<std::size_t>(k));

  CrossValidation cv;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      (fold_of.at(dataset.epochs[i].subject_id) == f ? test : train).push_back(i);
    }
    std::vector<std::string> test_subjects;
    for (const auto& s : subjects) {
      if (fold_of.at(s) == f) test_subjects.push_back(s);
    }
    auto fold_cfg = config;
    fold_cfg.seed = splitmix64(config.seed + static_cast<std::uint64_t>(f));
    const auto trained = pretrain(edf::subset(dataset, train), fold_cfg, model_config);
    cv.folds.push_back(evaluate(trained.model, edf::subset(dataset, test), "cv-fold-" + std::to_string(f),
                                config.seed, config.jobs));
    cv.test_subjects.push_back(std::move(test_subjects));
  }
  auto mean_std = [&](auto field, double& mean, double& sd) {
    mean = 0.0;
    for (const auto& r : cv.folds) mean += field(r);
    mean /= static_cast<double>(cv.folds.size());
    double var = 0.0;
    for (const auto& r : cv.folds) var += (field(r) - mean) * (field(r) - mean);
    sd = std::sqrt(var / static_cast<double>(cv.folds.size()));
  };
  mean_std([](const EvalReport& r) { return r.accuracy; }, cv.mean_accuracy, cv.std_accuracy);
  mean_std([](const EvalReport& r) { return r.macro_f1; }, cv.mean_macro_f1, cv.std_macro_f1);
  return cv;
}

nlohmann::json CrossValidation::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto j = folds[f].to_json();
    j["test_subjects"] = test_subjects[f];
    folds_json.push_back(j);
  }
  return {{"folds", folds_json},
          {"aggregate",
           {{"mean_accuracy", round4(mean_accuracy)},
            {"std_accuracy", round4(std_accuracy)},
            {"mean_macro_f1", round4(mean_macro_f1)},
            {"std_macro_f1", round4(std_macro_f1)}}}};
}

}  // namespace sleepalign::pipeline
