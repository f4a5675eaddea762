#include "sleepalign/nn/tensor.hpp"

#include <cmath>
#include <string>

namespace sleepalign::nn {

FeatureSet FeatureSet::select_rows(std::span<const std::size_t> positions) const {
  FeatureSet out;
  out.rows = positions.size();
  out.dim = dim;
  out.domain = domain;
  out.batch_id = batch_id;
  out.values.reserve(positions.size() * dim);
  for (auto p : positions) {
    if (p >= rows) throw InvalidArgument("FeatureSet::select_rows: row " + std::to_string(p) + " out of range");
    auto r = row(p);
    out.values.insert(out.values.end(), r.begin(), r.end());
  }
  return out;
}

void FeatureSet::validate() const {
  if (values.size() != rows * dim) {
    throw InvalidArgument("FeatureSet holds " + std::to_string(values.size()) + " values, expected " +
                          std::to_string(rows) + "x" + std::to_string(dim));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InvalidArgument("FeatureSet row " + std::to_string(i / (dim ? dim : 1)) + " has a non-finite entry");
    }
  }
}

}  // namespace sleepalign::nn
