#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sleepalign/common.hpp"

namespace sleepalign::nn {

// Dense batch x channels x length buffer. The gradient buffer is optional and,
// when allocated, mirrors the value shape.
struct Tensor {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::size_t b, std::size_t c, std::size_t l)
      : batch(b), channels(c), length(l), values(b * c * l, 0.0) {}

  std::size_t size() const { return batch * channels * length; }
  bool has_grad() const { return !grad.empty(); }
  void allocate_grad() { grad.assign(size(), 0.0); }

  double& at(std::size_t b, std::size_t c, std::size_t t) { return values[(b * channels + c) * length + t]; }
  double at(std::size_t b, std::size_t c, std::size_t t) const { return values[(b * channels + c) * length + t]; }
  std::span<const double> row(std::size_t b, std::size_t c) const {
    return std::span(values).subspan((b * channels + c) * length, length);
  }
};

// N feature vectors of dimension D (row-major).
struct FeatureSet {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  Domain domain = Domain::kSource;
  std::optional<int> batch_id;

  std::span<const double> row(std::size_t i) const { return std::span(values).subspan(i * dim, dim); }
  std::span<double> row(std::size_t i) { return std::span(values).subspan(i * dim, dim); }

  // Rows selected by position, keeping tag and dimension.
  FeatureSet select_rows(std::span<const std::size_t> positions) const;
  // Throws if any entry is non-finite or the value count disagrees with rows*dim.
  void validate() const;
};

}  // namespace sleepalign::nn
