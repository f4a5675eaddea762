#include "sleepalign/aligner/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "sleepalign/rng.hpp"

namespace sleepalign::aligner {

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string_view choice_name(SolverChoice c) {
  switch (c) {
    case SolverChoice::kAuto: return "auto";
    case SolverChoice::kExact: return "exact";
    case SolverChoice::kSinkhorn: return "sinkhorn";
  }
  return "?";
}

BatchReward score_one(const SourceBatch& batch, const nn::FeatureSet& reference, const SolverConfig& config) {
  BatchReward out;
  out.batch_id = batch.id;
  try {
    if (batch.features.rows == 0) throw InvalidArgument("batch " + std::to_string(batch.id) + " is empty");
    const auto cost = ot::cost_matrix(batch.features, reference, config.metric);
    const auto ws = ot::uniform_weights(cost.rows);
    const auto wt = ot::uniform_weights(cost.cols);
    bool exact = config.choice == SolverChoice::kExact;
    if (config.choice == SolverChoice::kAuto) {
      exact = cost.rows <= config.exact_max_batch && cost.cols <= config.exact_max_target;
    }
    ot::EmdResult r;
    if (exact) {
      r = ot::emd_exact(cost, ws, wt);
    } else {
      const double mean = cost.mean();
      ot::SinkhornOptions opt;
      opt.epsilon = config.sinkhorn_epsilon_factor * (mean > 0.0 ? mean : 1.0);
      opt.max_iter = config.sinkhorn_max_iter;
      opt.tol = config.sinkhorn_tol;
      r = ot::emd_sinkhorn(cost, ws, wt, opt);
      if (!r.converged) {
        throw Error("sinkhorn did not converge within " + std::to_string(opt.max_iter) + " iterations");
      }
    }
    out.emd = r.value;
    out.reward = ot::reward(r.value);
    out.solver = r.solver_tag();
  } catch (const std::exception& e) {
    out.ok = false;
    out.emd = 0.0;
    out.reward = 0.0;
    out.solver = std::string(choice_name(config.choice));
    out.error = e.what();
  }
  return out;
}

}  // namespace

nlohmann::json SolverConfig::to_json() const {
  return {{"solver", std::string(choice_name(choice))},
          {"metric", std::string(ot::metric_name(metric))},
          {"exact_max_batch", exact_max_batch},
          {"exact_max_target", exact_max_target},
          {"sinkhorn_epsilon_factor", sinkhorn_epsilon_factor},
          {"sinkhorn_max_iter", sinkhorn_max_iter},
          {"sinkhorn_tol", sinkhorn_tol},
          {"target_subsample", target_subsample},
          {"seed", seed}};
}

std::vector<SourceBatch> make_batches(const nn::FeatureSet& features, const std::vector<int>& labels,
                                      std::size_t batch_size) {
  if (batch_size == 0) throw InvalidArgument("make_batches: batch size must be >= 1");
  if (labels.size() != features.rows) throw InvalidArgument("make_batches: one label per feature row required");
  std::vector<SourceBatch> out;
  for (std::size_t start = 0; start < features.rows; start += batch_size) {
    SourceBatch b;
    b.id = static_cast<int>(out.size());
    for (std::size_t k = start; k < std::min(features.rows, start + batch_size); ++k) b.members.push_back(k);
    for (auto k : b.members) b.labels.push_back(labels[k]);
    b.features = features.select_rows(b.members);
    b.features.batch_id = b.id;
    out.push_back(std::move(b));
  }
  return out;
}

nn::FeatureSet target_reference(const nn::FeatureSet& target, const SolverConfig& config) {
  if (config.target_subsample == 0 || target.rows <= config.target_subsample) return target;
  std::vector<std::size_t> idx(target.rows);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(config.seed ^ 0x7a67e7ULL);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(config.target_subsample);
  std::sort(idx.begin(), idx.end());
  return target.select_rows(idx);
}

std::vector<BatchReward> score_batches(const std::vector<SourceBatch>& batches, const nn::FeatureSet& target,
                                       const SolverConfig& config) {
  if (target.rows == 0) throw InvalidArgument("score_batches: target feature set is empty");
  for (const auto& b : batches) {
    if (b.features.dim != target.dim) {
      throw InvalidArgument("score_batches: batch " + std::to_string(b.id) + " has feature dimension " +
                            std::to_string(b.features.dim) + ", target has " + std::to_string(target.dim));
    }
  }
  const auto reference = target_reference(target, config);
  std::vector<BatchReward> out(batches.size());
  const std::size_t workers = std::min<std::size_t>(batches.size(), static_cast<std::size_t>(std::max(config.jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < batches.size(); ++i) out[i] = score_one(batches[i], reference, config);
    return out;
  }
  // Each worker owns a stride of indices; results land in their input slots.
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < batches.size(); i += workers) out[i] = score_one(batches[i], reference, config);
    });
  }
  for (auto& t : threads) t.join();
  return out;
}

SelectionPolicy SelectionPolicy::absolute(double tau) {
  SelectionPolicy p;
  p.mode = Mode::kAbsoluteThreshold;
  p.tau = tau;
  p.validate();
  return p;
}

SelectionPolicy SelectionPolicy::top_quantile(double q) {
  SelectionPolicy p;
  p.mode = Mode::kTopQuantile;
  p.quantile = q;
  p.validate();
  return p;
}

void SelectionPolicy::validate() const {
  if (mode == Mode::kAbsoluteThreshold && !(tau >= 0.0)) {
    throw InvalidArgument("selection threshold tau must be >= 0");
  }
  if (mode == Mode::kTopQuantile && !(quantile > 0.0 && quantile <= 1.0)) {
    throw InvalidArgument("selection quantile must lie in (0, 1]");
  }
}

nlohmann::json SelectionPolicy::to_json() const {
  if (mode == Mode::kAbsoluteThreshold) return {{"mode", "absolute_threshold"}, {"tau", tau}};
  return {{"mode", "top_quantile"}, {"q", quantile}};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty list");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(values.size() - 1, lo + 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Selection select(const std::vector<BatchReward>& rewards, const SelectionPolicy& policy) {
  if (rewards.empty()) throw InvalidArgument("select: no rewards");
  policy.validate();
  Selection s;
  std::vector<const BatchReward*> ok;
  for (const auto& r : rewards) {
    if (r.ok) ok.push_back(&r);
  }
  if (policy.mode == SelectionPolicy::Mode::kAbsoluteThreshold) {
    s.threshold = policy.tau;
    for (const auto* r : ok) {
      if (r->reward > policy.tau) s.batch_ids.push_back(r->batch_id);
    }
  } else if (!ok.empty()) {
    std::vector<double> values;
    for (const auto* r : ok) values.push_back(r->reward);
    s.threshold = quantile(values, 1.0 - policy.quantile);
    for (const auto* r : ok) {
      if (r->reward >= s.threshold) s.batch_ids.push_back(r->batch_id);
    }
  }
  std::sort(s.batch_ids.begin(), s.batch_ids.end());
  if (s.batch_ids.empty()) s.status = SelectionStatus::kEmptySelection;
  return s;
}

double calibrate_threshold(const std::vector<BatchReward>& rewards, const ThresholdStrategy& strategy) {
  std::vector<double> values;
  for (const auto& r : rewards) {
    if (r.ok) values.push_back(r.reward);
  }
  if (values.empty()) throw InvalidArgument("calibrate_threshold: no scored batches");
  if (strategy.kind == ThresholdStrategy::Kind::kMedian) return quantile(values, 0.5);
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return mean + strategy.k * std::sqrt(var / n);
}

std::string scoring_csv(const std::vector<BatchReward>& rewards, const Selection& selection) {
  std::string out = "batch_id,emd,reward,selected,solver\n";
  for (const auto& r : rewards) {
    const bool chosen = std::binary_search(selection.batch_ids.begin(), selection.batch_ids.end(), r.batch_id);
    out += std::to_string(r.batch_id) + "," + fixed4(r.emd) + "," + fixed4(r.reward) + "," + (chosen ? "1" : "0") +
           "," + (r.ok ? r.solver : "failed") + "\n";
  }
  return out;
}

nlohmann::json scoring_summary(const std::vector<BatchReward>& rewards, const Selection& selection,
                               const SelectionPolicy& policy, const SolverConfig& solver) {
  std::size_t failed = 0;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : rewards) {
    if (!r.ok) {
      ++failed;
      failures.push_back({{"batch_id", r.batch_id}, {"error", r.error}});
    }
  }
  return {{"policy", policy.to_json()},
          {"tau", std::stod(fixed4(selection.threshold))},
          {"batches", rewards.size()},
          {"selected", selection.batch_ids.size()},
          {"failed", failed},
          {"failures", failures},
          {"status", selection.status == SelectionStatus::kOk ? "ok" : "empty_selection"},
          {"selected_ids", selection.batch_ids},
          {"solver", solver.to_json()}};
}

}  // namespace sleepalign::aligner
