#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sleepalign/nn/tensor.hpp"

namespace sleepalign::ot {

enum class Metric { kEuclidean, kSquaredEuclidean, kCosine };

std::string_view metric_name(Metric m);
Metric metric_from_name(std::string_view name);

// m x n ground-distance matrix, row-major.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  Metric metric = Metric::kEuclidean;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double mean() const;
  double max() const;
  CostMatrix scaled(double alpha) const;

  // Wraps an explicit matrix; throws on negative or non-finite entries.
  static CostMatrix from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                                Metric metric = Metric::kEuclidean);
};

double distance(std::span<const double> a, std::span<const double> b, Metric metric);

// Pairwise distances between the rows of `a` and the rows of `b`. Throws on a
// dimension mismatch or non-finite features.
CostMatrix cost_matrix(const nn::FeatureSet& a, const nn::FeatureSet& b, Metric metric = Metric::kEuclidean);

}  // namespace sleepalign::ot
