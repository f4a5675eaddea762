#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sleepalign/ot/cost_matrix.hpp"

namespace sleepalign::ot {

// Coupling f_ij with its marginals. Row-major m x n.
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> flow;
  std::vector<double> source_weights;
  std::vector<double> target_weights;

  double operator()(std::size_t i, std::size_t j) const { return flow[i * cols + j]; }

  // Largest |row sum - w_s| and |col sum - w_t|.
  double max_marginal_violation() const;
  double min_entry() const;
  double cost(const CostMatrix& c) const;
};

enum class SolverKind { kExact, kSinkhorn };

struct EmdResult {
  double value = 0.0;
  TransportPlan plan;
  SolverKind solver = SolverKind::kExact;
  double epsilon = 0.0;        // Sinkhorn only
  std::size_t iterations = 0;  // simplex pivots or Sinkhorn sweeps
  bool converged = true;
  // Dual potentials certifying optimality of the exact solution:
  // u_i + v_j <= d_ij everywhere, with equality on the support.
  std::vector<double> dual_u;
  std::vector<double> dual_v;

  std::string solver_tag() const;
};

std::vector<double> uniform_weights(std::size_t n);

// Exact transportation LP: Vogel's approximation for the starting basis, then
// transportation simplex (MODI pricing, most-negative reduced cost) falling
// back to Bland's rule after a run of degenerate pivots. Marginals are
// renormalised when their sums drift from 1 by more than 1e-12.
EmdResult emd_exact(const CostMatrix& cost, std::span<const double> source_weights,
                    std::span<const double> target_weights);

struct SinkhornOptions {
  double epsilon = 0.05;
  std::size_t max_iter = 10000;
  double tol = 1e-9;  // L1 row-marginal violation before rounding
};

// Log-domain Sinkhorn. The returned plan is rounded onto the feasible set and
// `value` is its transport cost. `converged` is false when max_iter ran out.
EmdResult emd_sinkhorn(const CostMatrix& cost, std::span<const double> source_weights,
                       std::span<const double> target_weights, const SinkhornOptions& options);

// Largest violation of u_i + v_j <= d_ij, and of equality on cells with flow
// above `support_threshold`.
struct DualCheck {
  double max_feasibility_violation = 0.0;
  double max_complementarity_violation = 0.0;
};
DualCheck check_duals(const EmdResult& result, const CostMatrix& cost, double support_threshold = 0.0);

inline constexpr double kRewardFloor = 1e-9;

// R = 1 / (emd + 1e-9).
double reward(double emd_value);

}  // namespace sleepalign::ot
