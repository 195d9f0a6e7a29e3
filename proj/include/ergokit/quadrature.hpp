#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ergokit/model.hpp"

namespace ergokit {

struct Quadrature1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight exp(-x^2). Nodes are Newton-polished on the
/// orthonormal recurrence. Small tail weights keep full relative accuracy.
inline Quadrature1D gauss_hermite(int n) {
  require(n >= 1, "gauss_hermite: need at least one node");
  constexpr double pim4 = 0.7511255444649425;  // pi^(-1/4)
  // starting points from the symmetric Jacobi matrix, polished below
  Mat jacobi = Mat::Zero(n, n);
  for (int j = 1; j < n; ++j) jacobi(j, j - 1) = jacobi(j - 1, j) = std::sqrt(0.5 * j);
  const Vec guess = Eigen::SelfAdjointEigenSolver<Mat>(jacobi, Eigen::EigenvaluesOnly).eigenvalues();
  Quadrature1D q{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = (n % 2 == 1 && i == n / 2) ? 0.0 : guess(n - 1 - i);
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-14 * std::max(1.0, std::abs(z))) break;
    }
    q.nodes[i] = z;
    q.nodes[n - 1 - i] = -z;
    q.weights[i] = q.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  return q;
}

/// Gauss-Legendre rule on [lo, hi].
inline Quadrature1D gauss_legendre(int n, double lo, double hi) {
  require(n >= 1, "gauss_legendre: need at least one node");
  Quadrature1D q{std::vector<double>(n), std::vector<double>(n)};
  const double mid = 0.5 * (hi + lo), half_len = 0.5 * (hi - lo);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    q.nodes[i] = mid - half_len * z;
    q.nodes[n - 1 - i] = mid + half_len * z;
    q.weights[i] = q.weights[n - 1 - i] = 2.0 * half_len / ((1.0 - z * z) * pp * pp);
  }
  return q;
}

/// Rule for E[g(N)] over the noise law: probability-weighted noise vectors,
/// with log-weights for log-domain sums.
struct NoiseRule {
  std::vector<Vec> points;
  std::vector<double> log_weights;
};

/// Tensor-product rule with `n` nodes per noise coordinate. Gaussian noise uses
/// Gauss-Hermite, uniform noise Gauss-Legendre, tabulated noise its atoms.
inline NoiseRule noise_rule(const NoiseLaw& law, int dim_noise, int n) {
  require(dim_noise >= 1 && dim_noise <= 3, "noise_rule: quadrature supports up to 3 noise dimensions");
  Quadrature1D base;
  switch (law.kind) {
    case NoiseKind::gaussian: {
      base = gauss_hermite(n);
      for (auto& x : base.nodes) x *= std::numbers::sqrt2;
      for (auto& w : base.weights) w /= std::sqrt(std::numbers::pi);
      break;
    }
    case NoiseKind::uniform: {
      base = gauss_legendre(n, law.lo, law.hi);
      for (auto& w : base.weights) w /= (law.hi - law.lo);
      break;
    }
    case NoiseKind::tabulated:
      base = {law.values, law.probs};
      break;
  }
  const std::size_t per = base.nodes.size();
  std::size_t total = 1;
  for (int d = 0; d < dim_noise; ++d) total *= per;
  NoiseRule rule;
  rule.points.reserve(total);
  rule.log_weights.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Vec p(dim_noise);
    double lw = 0.0;
    std::size_t rest = flat;
    for (int d = dim_noise - 1; d >= 0; --d) {
      const std::size_t j = rest % per;
      rest /= per;
      p(d) = base.nodes[j];
      lw += std::log(base.weights[j]);
    }
    if (!std::isfinite(lw)) continue;  // zero-probability atom
    rule.points.push_back(std::move(p));
    rule.log_weights.push_back(lw);
  }
  return rule;
}

}  // namespace ergokit
