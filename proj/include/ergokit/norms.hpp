#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "ergokit/grid.hpp"

namespace ergokit {

/// max_k |f(x_k)| / v(x_k) over the grid nodes.
inline double v_norm(const Vec& values, const Vec& weight_values) {
  require(values.size() > 0, "v_norm: empty grid");
  require(values.size() == weight_values.size(), "v_norm: shape mismatch");
  return (values.cwiseAbs().array() / weight_values.array()).maxCoeff();
}

inline double v_norm(const GridFunction& f, const WeightFunction& v) {
  require(f.grid && f.grid->size() > 0, "v_norm: empty grid");
  require(f.values.size() == f.grid->size(), "v_norm: shape mismatch");
  double best = 0.0;
  for (int k = 0; k < f.grid->size(); ++k)
    best = std::max(best, std::abs(f.values(k)) * std::exp(-v.log_value(f.grid->node(k))));
  return best;
}

/// Weighted Sobolev norm of order one: the largest of the v-norms of f and of
/// each of its partial derivatives.
inline double sobolev_norm_v1(const GridFunction& f, const WeightFunction& v) {
  require(f.has_derivs(), "sobolev_norm_v1: derivatives are required");
  double best = v_norm(f, v);
  for (const Vec& d : f.derivs) best = std::max(best, v_norm(GridFunction{f.grid, d, {}}, v));
  return best;
}

inline double sobolev_norm_v1(const Vec& values, const std::vector<Vec>& derivs,
                              const Vec& weight_values) {
  require(!derivs.empty(), "sobolev_norm_v1: derivatives are required");
  double best = v_norm(values, weight_values);
  for (const Vec& d : derivs) best = std::max(best, v_norm(d, weight_values));
  return best;
}

/// Dual norm of a signed measure on the nodes: sum_k |mu_k| v(x_k), attained
/// at h = v sign(mu).
inline double measure_v_norm(const Vec& mu, const Vec& weight_values) {
  require(mu.size() == weight_values.size(), "measure_v_norm: shape mismatch");
  require(mu.allFinite(), "measure_v_norm: non-finite weights");
  return mu.cwiseAbs().dot(weight_values);
}

/// Induced norm of a kernel matrix on the weighted sup space:
///   max_i sum_j |K(i,j)| v(x_j) / v(x_i).
inline double operator_v_norm(const Mat& k, const Vec& weight_values) {
  require(k.rows() == k.cols() && k.rows() == weight_values.size(),
          "operator_v_norm: kernel and weight shapes differ");
  const Vec row = k.cwiseAbs() * weight_values;
  return (row.array() / weight_values.array()).maxCoeff();
}

/// Upper bound on the (v,1)-operator norm: also applies the row-node
/// derivative of K to the worst-case unit-v-norm test function.
inline double operator_v1_norm(const Grid& grid, const Mat& k, const Vec& weight_values) {
  double best = operator_v_norm(k, weight_values);
  for (int a = 0; a < grid.dim(); ++a)
    best = std::max(best, operator_v_norm(grid_row_derivative(grid, k, a), weight_values));
  return best;
}

struct DecayFit {
  double b0 = 0.0;
  double rho0 = 0.0;
  double r_squared = 0.0;
};

/// Least-squares fit of log ||.|| = log b0 + t log rho0.
inline DecayFit decay_rate_fit(const std::vector<std::pair<double, double>>& series) {
  require(series.size() >= 3, "decay_rate_fit: need at least three points");
  const double n = static_cast<double>(series.size());
  double st = 0.0, sy = 0.0;
  for (auto [t, y] : series) {
    require(y > 0.0 && std::isfinite(y), "decay_rate_fit: norms must be positive and finite");
    st += t;
    sy += std::log(y);
  }
  const double mt = st / n, my = sy / n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (auto [t, y] : series) {
    const double dt = t - mt, dy = std::log(y) - my;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  require(stt > 0.0, "decay_rate_fit: need at least two distinct times");
  const double slope = sty / stt;
  const double intercept = my - slope * mt;
  double sse = 0.0;
  for (auto [t, y] : series) {
    const double r = std::log(y) - (intercept + slope * t);
    sse += r * r;
  }
  const double r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return {std::exp(intercept), std::exp(slope), r2};
}

}  // namespace ergokit
