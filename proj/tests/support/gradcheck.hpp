#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sleepalign/nn/mrcnn.hpp"
#include "sleepalign/rng.hpp"

namespace oracle {

// Mean softmax cross-entropy recomputed from forward logits.
inline double mean_cross_entropy(const sleepalign::nn::ModelParams& m, const std::vector<std::vector<double>>& batch,
                                 const std::vector<int>& labels) {
  const auto fr = sleepalign::nn::forward(m, batch);
  const auto k = static_cast<std::size_t>(m.config().classes);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = fr.logits_row(i, k);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    total += -(row[static_cast<std::size_t>(labels[i])] - mx - std::log(z));
  }
  return total / static_cast<double>(batch.size());
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central differences at `h` against backward() for the given parameters;
// relative error |a - n| / (|a| + 1e-8).
inline GradCheck gradient_check(const sleepalign::nn::ModelParams& model,
                                const std::vector<std::vector<double>>& batch, const std::vector<int>& labels,
                                const std::vector<std::size_t>& indices, double h = 1e-5) {
  const auto g = sleepalign::nn::backward(model, batch, labels);
  GradCheck out;
  auto probe = model;
  for (auto idx : indices) {
    const double saved = probe.values()[idx];
    probe.values()[idx] = saved + h;
    const double up = mean_cross_entropy(probe, batch, labels);
    probe.values()[idx] = saved - h;
    const double down = mean_cross_entropy(probe, batch, labels);
    probe.values()[idx] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = g.gradients[idx];
    const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
    if (rel > out.max_rel_error || indices.front() == idx) {
      if (rel >= out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_index = idx;
        out.worst_analytic = analytic;
        out.worst_numeric = numeric;
      }
    }
  }
  return out;
}

inline std::vector<std::vector<double>> random_inputs(sleepalign::Rng& rng, std::size_t n, std::size_t length) {
  std::vector<std::vector<double>> out(n, std::vector<double>(length));
  for (auto& x : out) {
    const double f = rng.uniform(1.0, 15.0);
    for (std::size_t t = 0; t < length; ++t) {
      x[t] = 40.0 * std::sin(2.0 * M_PI * f * static_cast<double>(t) / 100.0) + 20.0 * rng.normal();
    }
  }
  return out;
}

}  // namespace oracle
