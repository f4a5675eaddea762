#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sleepalign/ot/emd.hpp"

namespace sleepalign::ot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& terms) {
  double mx = kNegInf;
  for (double t : terms) mx = std::max(mx, t);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

std::vector<double> checked_weights(std::span<const double> w, const char* side) {
  if (w.empty()) throw InvalidArgument(std::string("emd_sinkhorn: empty ") + side + " marginal");
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument(std::string("emd_sinkhorn: ") + side + " weights must be finite and >= 0");
    }
    sum += v;
  }
  if (!(sum > 0.0)) throw InvalidArgument(std::string("emd_sinkhorn: ") + side + " weights sum to zero");
  std::vector<double> out(w.begin(), w.end());
  if (std::abs(sum - 1.0) > 1e-12) {
    for (auto& v : out) v /= sum;
  }
  return out;
}

// Projects a nearly feasible plan onto the transport polytope (Altschuler,
// Weed & Rigollet rounding): scale rows down, scale columns down, then add a
// rank-one correction for the remaining deficit.
void round_to_feasible(std::vector<double>& p, std::size_t m, std::size_t n, const std::vector<double>& a,
                       const std::vector<double>& b) {
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += p[i * n + j];
    if (r > a[i] && r > 0.0) {
      const double x = a[i] / r;
      for (std::size_t j = 0; j < n; ++j) p[i * n + j] *= x;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) c += p[i * n + j];
    if (c > b[j] && c > 0.0) {
      const double y = b[j] / c;
      for (std::size_t i = 0; i < m; ++i) p[i * n + j] *= y;
    }
  }
  std::vector<double> err_r(m), err_c(n);
  double l1 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += p[i * n + j];
    err_r[i] = std::max(0.0, a[i] - r);
    l1 += err_r[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) c += p[i * n + j];
    err_c[j] = std::max(0.0, b[j] - c);
  }
  if (l1 > 0.0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) p[i * n + j] += err_r[i] * err_c[j] / l1;
    }
  }
}

}  // namespace

EmdResult emd_sinkhorn(const CostMatrix& cost, std::span<const double> source_weights,
                       std::span<const double> target_weights, const SinkhornOptions& options) {
  if (!(options.epsilon > 0.0)) throw InvalidArgument("emd_sinkhorn: epsilon must be > 0");
  const auto a = checked_weights(source_weights, "source");
  const auto b = checked_weights(target_weights, "target");
  const std::size_t m = a.size(), n = b.size();
  if (cost.rows != m || cost.cols != n) throw InvalidArgument("emd_sinkhorn: cost/marginal shape mismatch");
  for (double v : cost.values) {
    if (!std::isfinite(v)) throw InvalidArgument("emd_sinkhorn: non-finite cost entry");
  }

  const double eps = options.epsilon;
  std::vector<double> log_a(m), log_b(n);
  for (std::size_t i = 0; i < m; ++i) log_a[i] = a[i] > 0.0 ? std::log(a[i]) : kNegInf;
  for (std::size_t j = 0; j < n; ++j) log_b[j] = b[j] > 0.0 ? std::log(b[j]) : kNegInf;

  // Dual potentials f, g; plan P_ij = exp((f_i + g_j - C_ij) / eps).
  std::vector<double> f(m, 0.0), g(n, 0.0);
  std::vector<double> row_terms(n), col_terms(m);
  auto log_plan = [&](std::size_t i, std::size_t j) { return (f[i] + g[j] - cost(i, j)) / eps; };

  EmdResult r;
  r.solver = SolverKind::kSinkhorn;
  r.epsilon = eps;
  r.converged = false;
  std::size_t it = 0;
  while (it < options.max_iter) {
    ++it;
    for (std::size_t i = 0; i < m; ++i) {
      if (log_a[i] == kNegInf) {
        f[i] = kNegInf;
        continue;
      }
      for (std::size_t j = 0; j < n; ++j) row_terms[j] = g[j] == kNegInf ? kNegInf : (g[j] - cost(i, j)) / eps;
      f[i] = eps * (log_a[i] - log_sum_exp(row_terms));
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (log_b[j] == kNegInf) {
        g[j] = kNegInf;
        continue;
      }
      for (std::size_t i = 0; i < m; ++i) col_terms[i] = f[i] == kNegInf ? kNegInf : (f[i] - cost(i, j)) / eps;
      g[j] = eps * (log_b[j] - log_sum_exp(col_terms));
    }
    // Columns are exact after the g update; measure the row violation.
    double violation = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      if (f[i] != kNegInf) {
        for (std::size_t j = 0; j < n; ++j) {
          if (g[j] != kNegInf) s += std::exp(log_plan(i, j));
        }
      }
      violation += std::abs(s - a[i]);
    }
    if (violation <= options.tol) {
      r.converged = true;
      break;
    }
  }
  r.iterations = it;

  std::vector<double> p(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (f[i] != kNegInf && g[j] != kNegInf) p[i * n + j] = std::exp(log_plan(i, j));
    }
  }
  round_to_feasible(p, m, n, a, b);
  r.plan.rows = m;
  r.plan.cols = n;
  r.plan.flow = std::move(p);
  r.plan.source_weights = a;
  r.plan.target_weights = b;
  r.value = r.plan.cost(cost);
  return r;
}

}  // namespace sleepalign::ot
