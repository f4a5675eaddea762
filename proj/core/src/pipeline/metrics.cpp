#include "sleepalign/pipeline/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace sleepalign::pipeline {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                const std::string& protocol, std::uint64_t seed) {
  if (truth.empty()) throw InvalidArgument("evaluate: empty dataset");
  if (truth.size() != predicted.size()) throw InvalidArgument("evaluate: truth/prediction length mismatch");
  EvalReport r;
  r.protocol = protocol;
  r.seed = seed;
  r.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(stage_index(stage_from_index(truth[i])));
    const auto p = static_cast<std::size_t>(stage_index(stage_from_index(predicted[i])));
    ++r.confusion[t][p];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kNumStages; ++c) correct += r.confusion[c][c];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);

  double f1_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < kNumStages; ++c) {
    std::size_t support = 0, predicted_c = 0;
    for (std::size_t k = 0; k < kNumStages; ++k) {
      support += r.confusion[c][k];
      predicted_c += r.confusion[k][c];
    }
    auto& m = r.per_class[c];
    m.support = support;
    const double tp = static_cast<double>(r.confusion[c][c]);
    m.precision = predicted_c ? tp / static_cast<double>(predicted_c) : 0.0;
    m.recall = support ? tp / static_cast<double>(support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    if (support == 0) {
      r.excluded_classes.emplace_back(stage_name(static_cast<Stage>(c)));
      continue;
    }
    f1_sum += m.f1;
    ++present;
  }
  r.macro_f1 = f1_sum / static_cast<double>(present);
  return r;
}

EvalReport evaluate(const nn::ModelParams& model, const edf::EpochDataset& labeled, const std::string& protocol,
                    std::uint64_t seed, int jobs) {
  if (labeled.empty()) throw InvalidArgument("evaluate: empty dataset");
  std::vector<int> truth;
  truth.reserve(labeled.size());
  for (const auto& e : labeled.epochs) {
    if (!e.label) throw InvalidArgument("evaluate: epoch " + std::to_string(e.index) + " of '" + e.subject_id + "' is unlabeled");
    truth.push_back(stage_index(*e.label));
  }
  const auto predicted = nn::predict(model, labeled, jobs);
  return evaluate_predictions(truth, predicted, protocol, seed);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json cm = nlohmann::json::array();
  for (const auto& row : confusion) cm.push_back(row);
  nlohmann::json pc = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumStages; ++c) {
    const auto& m = per_class[c];
    pc[std::string(stage_name(static_cast<Stage>(c)))] = {
        {"precision", round4(m.precision)}, {"recall", round4(m.recall)}, {"f1", round4(m.f1)}, {"support", m.support}};
  }
  nlohmann::json labels = nlohmann::json::array();
  for (auto s : kAllStages) labels.push_back(std::string(stage_name(s)));
  return {{"protocol", protocol},
          {"seed", seed},
          {"total", total},
          {"accuracy", round4(accuracy)},
          {"macro_f1", round4(macro_f1)},
          {"labels", labels},
          {"confusion", cm},
          {"per_class", pc},
          {"excluded_classes", excluded_classes}};
}

std::string EvalReport::confusion_csv() const {
  std::string out = "truth\\predicted";
  for (auto s : kAllStages) out += "," + std::string(stage_name(s));
  out += "\n";
  for (std::size_t t = 0; t < kNumStages; ++t) {
    out += std::string(stage_name(static_cast<Stage>(t)));
    for (std::size_t p = 0; p < kNumStages; ++p) out += "," + std::to_string(confusion[t][p]);
    out += "\n";
  }
  return out;
}

}  // namespace sleepalign::pipeline
