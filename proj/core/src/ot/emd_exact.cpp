#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "sleepalign/ot/emd.hpp"

namespace sleepalign::ot {

namespace {

std::vector<double> normalized(std::span<const double> w, const char* side) {
  if (w.empty()) throw InvalidArgument(std::string("emd: empty ") + side + " marginal");
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument(std::string("emd: ") + side + " weights must be finite and >= 0");
    sum += v;
  }
  if (!(sum > 0.0)) throw InvalidArgument(std::string("emd: ") + side + " weights sum to zero");
  std::vector<double> out(w.begin(), w.end());
  if (std::abs(sum - 1.0) > 1e-12) {
    for (auto& v : out) v /= sum;
  }
  return out;
}

void check_inputs(const CostMatrix& cost, std::size_t m, std::size_t n) {
  if (cost.rows == 0 || cost.cols == 0) throw InvalidArgument("emd: empty cost matrix");
  if (cost.rows != m || cost.cols != n) {
    throw InvalidArgument("emd: cost is " + std::to_string(cost.rows) + "x" + std::to_string(cost.cols) +
                          " but marginals have lengths " + std::to_string(m) + " and " + std::to_string(n));
  }
  for (double v : cost.values) {
    if (!std::isfinite(v)) throw InvalidArgument("emd: non-finite cost entry");
  }
}

struct BasicCell {
  std::size_t row;
  std::size_t col;
  double flow;
};

class TransportationSimplex {
 public:
  TransportationSimplex(const CostMatrix& cost, std::vector<double> supply, std::vector<double> demand)
      : c_(cost), m_(cost.rows), n_(cost.cols), a_(std::move(supply)), b_(std::move(demand)) {}

  EmdResult solve() {
    vogel();
    rebuild_adjacency();
    const double scale = std::max(1.0, c_.max());
    const double tol = 1e-12 * scale;
    const std::size_t max_pivots = 50 * m_ * n_ + 1000;
    std::size_t degenerate_run = 0;
    bool bland = false;
    std::size_t pivots = 0;

    while (true) {
      compute_duals();
      std::size_t enter_i = 0, enter_j = 0;
      if (!price(tol, bland, enter_i, enter_j)) break;
      if (++pivots > max_pivots) {
        throw Error("emd_exact: simplex did not terminate after " + std::to_string(max_pivots) + " pivots");
      }
      const double theta = pivot(enter_i, enter_j, bland);
      if (theta == 0.0) {
        if (++degenerate_run > m_ + n_) bland = true;
      } else {
        degenerate_run = 0;
      }
    }

    EmdResult r;
    r.solver = SolverKind::kExact;
    r.iterations = pivots;
    r.plan.rows = m_;
    r.plan.cols = n_;
    r.plan.flow.assign(m_ * n_, 0.0);
    for (const auto& cell : basis_) r.plan.flow[cell.row * n_ + cell.col] = cell.flow;
    r.plan.source_weights = a_;
    r.plan.target_weights = b_;
    r.value = r.plan.cost(c_);
    r.dual_u = u_;
    r.dual_v = v_;
    return r;
  }

 private:
  // Vogel's approximation. Each allocation retires exactly one row or column
  // (both on the final step), so the result has m+n-1 cells forming a
  // spanning tree even when some allocations are zero.
  void vogel() {
    std::vector<double> s = a_, d = b_;
    std::vector<char> row_live(m_, 1), col_live(n_, 1);
    std::size_t rows_left = m_, cols_left = n_;
    basis_.clear();
    basis_.reserve(m_ + n_ - 1);

    auto line_penalty = [&](bool is_row, std::size_t k, std::size_t& best_cell) {
      double lo1 = std::numeric_limits<double>::infinity(), lo2 = lo1;
      best_cell = 0;
      const std::size_t len = is_row ? n_ : m_;
      for (std::size_t t = 0; t < len; ++t) {
        if (is_row ? !col_live[t] : !row_live[t]) continue;
        const double cost = is_row ? c_(k, t) : c_(t, k);
        if (cost < lo1) {
          lo2 = lo1;
          lo1 = cost;
          best_cell = t;
        } else if (cost < lo2) {
          lo2 = cost;
        }
      }
      return std::isinf(lo2) ? lo1 : lo2 - lo1;
    };

    while (rows_left > 0 && cols_left > 0) {
      double best_penalty = -1.0;
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < m_; ++i) {
        if (!row_live[i]) continue;
        std::size_t j = 0;
        const double p = line_penalty(true, i, j);
        if (p > best_penalty) {
          best_penalty = p;
          bi = i;
          bj = j;
        }
      }
      for (std::size_t j = 0; j < n_; ++j) {
        if (!col_live[j]) continue;
        std::size_t i = 0;
        const double p = line_penalty(false, j, i);
        if (p > best_penalty) {
          best_penalty = p;
          bi = i;
          bj = j;
        }
      }
      const double x = std::min(s[bi], d[bj]);
      basis_.push_back({bi, bj, x});
      s[bi] -= x;
      d[bj] -= x;
      if (rows_left == 1 && cols_left == 1) {
        row_live[bi] = col_live[bj] = 0;
        rows_left = cols_left = 0;
      } else if (rows_left == 1) {
        col_live[bj] = 0;
        --cols_left;
      } else if (cols_left == 1) {
        row_live[bi] = 0;
        --rows_left;
      } else if (s[bi] <= d[bj]) {
        row_live[bi] = 0;
        --rows_left;
      } else {
        col_live[bj] = 0;
        --cols_left;
      }
    }
    if (basis_.size() != m_ + n_ - 1) throw Error("emd_exact: initial basis has wrong size");
  }

  void rebuild_adjacency() {
    row_cells_.assign(m_, {});
    col_cells_.assign(n_, {});
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      row_cells_[basis_[k].row].push_back(k);
      col_cells_[basis_[k].col].push_back(k);
    }
  }

  // u_i + v_j = c_ij on every basic cell, u_0 = 0.
  void compute_duals() {
    const double unset = std::numeric_limits<double>::quiet_NaN();
    u_.assign(m_, unset);
    v_.assign(n_, unset);
    u_[0] = 0.0;
    stack_.clear();
    stack_.push_back(0);  // node ids: rows [0, m), cols [m, m+n)
    std::size_t visited = 1;
    while (!stack_.empty()) {
      const std::size_t node = stack_.back();
      stack_.pop_back();
      if (node < m_) {
        for (auto k : row_cells_[node]) {
          const auto j = basis_[k].col;
          if (std::isnan(v_[j])) {
            v_[j] = c_(node, j) - u_[node];
            stack_.push_back(m_ + j);
            ++visited;
          }
        }
      } else {
        const std::size_t j = node - m_;
        for (auto k : col_cells_[j]) {
          const auto i = basis_[k].row;
          if (std::isnan(u_[i])) {
            u_[i] = c_(i, j) - v_[j];
            stack_.push_back(i);
            ++visited;
          }
        }
      }
    }
    if (visited != m_ + n_) throw Error("emd_exact: basis is not a spanning tree");
  }

  bool price(double tol, bool bland, std::size_t& ei, std::size_t& ej) const {
    double best = -tol;
    bool found = false;
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double r = c_(i, j) - u_[i] - v_[j];
        if (r < best) {
          ei = i;
          ej = j;
          found = true;
          if (bland) return true;  // first eligible index
          best = r;
        }
      }
    }
    return found;
  }

  // Tree path from row node `from_row` to column node `to_col`, as basis
  // slots ordered from the row end.
  std::vector<std::size_t> tree_path(std::size_t from_row, std::size_t to_col) {
    const std::size_t nodes = m_ + n_;
    parent_cell_.assign(nodes, std::numeric_limits<std::size_t>::max());
    std::vector<char> seen(nodes, 0);
    stack_.clear();
    stack_.push_back(from_row);
    seen[from_row] = 1;
    const std::size_t target = m_ + to_col;
    while (!stack_.empty() && !seen[target]) {
      const std::size_t node = stack_.back();
      stack_.pop_back();
      const auto& cells = node < m_ ? row_cells_[node] : col_cells_[node - m_];
      for (auto k : cells) {
        const std::size_t other = node < m_ ? m_ + basis_[k].col : basis_[k].row;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_cell_[other] = k;
        stack_.push_back(other);
      }
    }
    if (!seen[target]) throw Error("emd_exact: no tree path for entering cell");
    std::vector<std::size_t> path;
    std::size_t node = target;
    while (node != from_row) {
      const auto k = parent_cell_[node];
      path.push_back(k);
      node = node < m_ ? m_ + basis_[k].col : basis_[k].row;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  double pivot(std::size_t ei, std::size_t ej, bool bland) {
    const auto path = tree_path(ei, ej);
    // Cycle: +(ei,ej), then the path cells from the column end alternate -,+,...
    // The path has odd length, so both end cells are donors.
    const std::size_t len = path.size();
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = 0;
    for (std::size_t p = 0; p < len; ++p) {
      const bool donor = ((len - 1 - p) % 2) == 0;
      if (!donor) continue;
      const auto& cell = basis_[path[p]];
      const double f = cell.flow;
      const bool better = f < theta ||
                          (f == theta && bland &&
                           cell.row * n_ + cell.col < basis_[leave].row * n_ + basis_[leave].col);
      if (better) {
        theta = f;
        leave = path[p];
      }
    }
    for (std::size_t p = 0; p < len; ++p) {
      const bool donor = ((len - 1 - p) % 2) == 0;
      auto& cell = basis_[path[p]];
      if (path[p] == leave) continue;
      cell.flow = donor ? std::max(0.0, cell.flow - theta) : cell.flow + theta;
    }
    // The leaving slot is reused for the entering cell.
    auto& out = basis_[leave];
    erase_value(row_cells_[out.row], leave);
    erase_value(col_cells_[out.col], leave);
    out = BasicCell{ei, ej, theta};
    row_cells_[ei].push_back(leave);
    col_cells_[ej].push_back(leave);
    return theta;
  }

  static void erase_value(std::vector<std::size_t>& v, std::size_t value) {
    v.erase(std::find(v.begin(), v.end(), value));
  }

  const CostMatrix& c_;
  std::size_t m_, n_;
  std::vector<double> a_, b_;
  std::vector<BasicCell> basis_;
  std::vector<std::vector<std::size_t>> row_cells_, col_cells_;
  std::vector<double> u_, v_;
  std::vector<std::size_t> stack_, parent_cell_;
};

}  // namespace

double TransportPlan::max_marginal_violation() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += flow[i * cols + j];
    worst = std::max(worst, std::abs(s - source_weights[i]));
  }
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += flow[i * cols + j];
    worst = std::max(worst, std::abs(s - target_weights[j]));
  }
  return worst;
}

double TransportPlan::min_entry() const {
  return flow.empty() ? 0.0 : *std::min_element(flow.begin(), flow.end());
}

double TransportPlan::cost(const CostMatrix& c) const {
  double total = 0.0;
  for (std::size_t k = 0; k < flow.size(); ++k) total += flow[k] * c.values[k];
  return total;
}

std::string EmdResult::solver_tag() const {
  if (solver == SolverKind::kExact) return "exact";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "sinkhorn(%.4g)", epsilon);
  return buf;
}

std::vector<double> uniform_weights(std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_weights: n must be >= 1");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

EmdResult emd_exact(const CostMatrix& cost, std::span<const double> source_weights,
                    std::span<const double> target_weights) {
  auto a = normalized(source_weights, "source");
  auto b = normalized(target_weights, "target");
  check_inputs(cost, a.size(), b.size());
  const std::size_t m = a.size(), n = b.size();

  if (m == 1 || n == 1) {
    // A single source (target) point ships its whole mass to every target
    // (from every source) in proportion to the other marginal.
    EmdResult r;
    r.plan.rows = m;
    r.plan.cols = n;
    r.plan.flow.assign(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) r.plan.flow[i * n + j] = (m == 1 ? b[j] : a[i]);
    }
    r.plan.source_weights = a;
    r.plan.target_weights = b;
    r.value = r.plan.cost(cost);
    if (m == 1) {
      r.dual_u = {0.0};
      r.dual_v.assign(cost.values.begin(), cost.values.end());
    } else {
      r.dual_v = {0.0};
      r.dual_u.assign(cost.values.begin(), cost.values.end());
    }
    return r;
  }
  return TransportationSimplex(cost, std::move(a), std::move(b)).solve();
}

DualCheck check_duals(const EmdResult& result, const CostMatrix& cost, double support_threshold) {
  DualCheck out;
  if (result.dual_u.size() != cost.rows || result.dual_v.size() != cost.cols) {
    throw InvalidArgument("check_duals: result carries no dual potentials of matching size");
  }
  for (std::size_t i = 0; i < cost.rows; ++i) {
    for (std::size_t j = 0; j < cost.cols; ++j) {
      const double slack = cost(i, j) - result.dual_u[i] - result.dual_v[j];
      out.max_feasibility_violation = std::max(out.max_feasibility_violation, -slack);
      if (result.plan(i, j) > support_threshold) {
        out.max_complementarity_violation = std::max(out.max_complementarity_violation, std::abs(slack));
      }
    }
  }
  return out;
}

double reward(double emd_value) {
  if (!(emd_value >= 0.0)) throw InvalidArgument("reward: EMD must be >= 0, got " + std::to_string(emd_value));
  return 1.0 / (emd_value + kRewardFloor);
}

}  // namespace sleepalign::ot
