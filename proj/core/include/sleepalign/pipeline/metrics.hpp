#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/common.hpp"
#include "sleepalign/edf/dataset.hpp"
#include "sleepalign/nn/mrcnn.hpp"

namespace sleepalign::pipeline {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // truth count
};

using ConfusionMatrix = std::array<std::array<std::size_t, kNumStages>, kNumStages>;  // [truth][predicted]

struct EvalReport {
  ConfusionMatrix confusion{};
  std::size_t total = 0;
  double accuracy = 0.0;
  // Unweighted mean of per-class F1 over classes present in the truth.
  double macro_f1 = 0.0;
  std::array<ClassMetrics, kNumStages> per_class{};
  std::vector<std::string> excluded_classes;  // absent from truth
  std::string protocol;
  std::uint64_t seed = 0;

  // Fixed 4-decimal numbers; no timing fields, so reruns compare equal.
  nlohmann::json to_json() const;
  std::string confusion_csv() const;
};

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                const std::string& protocol = "", std::uint64_t seed = 0);

// Requires every epoch to carry a label.
EvalReport evaluate(const nn::ModelParams& model, const edf::EpochDataset& labeled, const std::string& protocol = "",
                    std::uint64_t seed = 0, int jobs = 1);

double round4(double v);

}  // namespace sleepalign::pipeline
