#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/nn/tensor.hpp"
#include "sleepalign/ot/cost_matrix.hpp"
#include "sleepalign/ot/emd.hpp"

namespace sleepalign::aligner {

// A group of source epochs scored and selected as a unit.
struct SourceBatch {
  int id = 0;
  std::vector<std::size_t> members;  // positions in the source dataset
  std::vector<int> labels;
  nn::FeatureSet features;
};

struct BatchReward {
  int batch_id = 0;
  double emd = 0.0;
  double reward = 0.0;
  std::string solver;  // "exact" or "sinkhorn(eps)"
  bool ok = true;      // false when the solver failed for this batch
  std::string error;
};

enum class SolverChoice { kAuto, kExact, kSinkhorn };

struct SolverConfig {
  SolverChoice choice = SolverChoice::kAuto;
  ot::Metric metric = ot::Metric::kEuclidean;
  // kAuto uses the exact solver up to this many batch x target rows.
  std::size_t exact_max_batch = 256;
  std::size_t exact_max_target = 512;
  // Sinkhorn epsilon as a fraction of the mean ground cost.
  double sinkhorn_epsilon_factor = 0.05;
  std::size_t sinkhorn_max_iter = 10000;
  double sinkhorn_tol = 1e-9;
  // Target rows are uniformly subsampled (seeded) down to this count.
  std::size_t target_subsample = 512;
  std::uint64_t seed = 0;
  int jobs = 1;

  nlohmann::json to_json() const;
};

// Splits `features` (one row per source epoch) into consecutive batches of
// `batch_size` rows; the last batch may be smaller. Ids count from 0.
std::vector<SourceBatch> make_batches(const nn::FeatureSet& features, const std::vector<int>& labels,
                                      std::size_t batch_size);

// Target reference used for scoring: the full set or a seeded uniform
// subsample of `target_subsample` rows.
nn::FeatureSet target_reference(const nn::FeatureSet& target, const SolverConfig& config);

// EMD between each batch and the target reference under uniform marginals,
// with R = 1/(EMD + 1e-9). Output order matches input order. A solver failure
// marks that batch (ok = false, reward 0) without aborting the others.
std::vector<BatchReward> score_batches(const std::vector<SourceBatch>& batches, const nn::FeatureSet& target,
                                       const SolverConfig& config);

struct SelectionPolicy {
  enum class Mode { kAbsoluteThreshold, kTopQuantile };
  Mode mode = Mode::kTopQuantile;
  double tau = 0.0;       // kAbsoluteThreshold: select R > tau
  double quantile = 0.5;  // kTopQuantile: select R >= (1-q)-quantile

  static SelectionPolicy absolute(double tau);
  static SelectionPolicy top_quantile(double q);
  void validate() const;
  nlohmann::json to_json() const;
};

enum class SelectionStatus { kOk, kEmptySelection };

struct Selection {
  std::vector<int> batch_ids;  // ascending
  SelectionStatus status = SelectionStatus::kOk;
  double threshold = 0.0;      // effective reward cut applied
};

// Batches that failed to score are never selected.
Selection select(const std::vector<BatchReward>& rewards, const SelectionPolicy& policy);

struct ThresholdStrategy {
  enum class Kind { kMedian, kMeanStd };
  Kind kind = Kind::kMedian;
  double k = 0.0;  // kMeanStd: tau = mean + k * std (population std)

  static ThresholdStrategy median() { return {}; }
  static ThresholdStrategy mean_std(double k) { return {Kind::kMeanStd, k}; }
};

double calibrate_threshold(const std::vector<BatchReward>& rewards, const ThresholdStrategy& strategy);

// Linear-interpolation quantile (R type 7) of `values`, q in [0, 1].
double quantile(std::vector<double> values, double q);

// Scoring report: CSV rows (batch_id,emd,reward,selected,solver) with 4
// decimal places, and the JSON summary.
std::string scoring_csv(const std::vector<BatchReward>& rewards, const Selection& selection);
nlohmann::json scoring_summary(const std::vector<BatchReward>& rewards, const Selection& selection,
                               const SelectionPolicy& policy, const SolverConfig& solver);

}  // namespace sleepalign::aligner
