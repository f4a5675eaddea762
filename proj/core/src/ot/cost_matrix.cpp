#include "sleepalign/ot/cost_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sleepalign::ot {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kEuclidean: return "euclidean";
    case Metric::kSquaredEuclidean: return "sqeuclidean";
    case Metric::kCosine: return "cosine";
  }
  return "?";
}

Metric metric_from_name(std::string_view name) {
  if (name == "euclidean") return Metric::kEuclidean;
  if (name == "sqeuclidean") return Metric::kSquaredEuclidean;
  if (name == "cosine") return Metric::kCosine;
  throw InvalidArgument("unknown metric '" + std::string(name) + "' (euclidean|sqeuclidean|cosine)");
}

double CostMatrix::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double CostMatrix::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

CostMatrix CostMatrix::scaled(double alpha) const {
  CostMatrix out = *this;
  for (auto& v : out.values) v *= alpha;
  return out;
}

CostMatrix CostMatrix::from_values(std::size_t rows, std::size_t cols, std::vector<double> values, Metric metric) {
  if (values.size() != rows * cols) throw InvalidArgument("cost matrix: value count does not match shape");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("cost matrix entries must be finite and >= 0");
  }
  return CostMatrix{rows, cols, std::move(values), metric};
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  switch (metric) {
    case Metric::kEuclidean:
    case Metric::kSquaredEuclidean: {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
      }
      return metric == Metric::kEuclidean ? std::sqrt(acc) : acc;
    }
    case Metric::kCosine: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
      }
      if (na == 0.0 && nb == 0.0) return 0.0;
      if (na == 0.0 || nb == 0.0) return 1.0;
      return std::max(0.0, 1.0 - dot / std::sqrt(na * nb));
    }
  }
  return 0.0;
}

CostMatrix cost_matrix(const nn::FeatureSet& a, const nn::FeatureSet& b, Metric metric) {
  if (a.dim != b.dim) {
    throw InvalidArgument("cost_matrix: feature dimensions differ (" + std::to_string(a.dim) + " vs " +
                          std::to_string(b.dim) + ")");
  }
  a.validate();
  b.validate();
  CostMatrix c;
  c.rows = a.rows;
  c.cols = b.rows;
  c.metric = metric;
  c.values.resize(a.rows * b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) c(i, j) = distance(a.row(i), b.row(j), metric);
  }
  return c;
}

}  // namespace sleepalign::ot
