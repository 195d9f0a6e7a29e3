#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ergokit/model.hpp"

namespace ergokit {

/// Tensor-product Bernstein polynomial of degree m in each of N variables,
/// defined on an axis-aligned box mapped affinely onto [0,1]^N.
struct BernsteinFit {
  int degree = 1;
  int dims = 1;
  std::vector<double> coeffs;  // (m+1)^N samples, first index slowest
  Vec box_lo;
  Vec box_hi;

  std::size_t coeff_count() const { return coeffs.size(); }
};

inline constexpr double kBernsteinMaxCoefficients = 1e8;

/// Values of the m+1 Bernstein basis polynomials of degree m at z, built with
/// the de Casteljau recurrence.
inline std::vector<double> bernstein_basis(int m, double z) {
  std::vector<double> b(m + 1, 0.0);
  b[0] = 1.0;
  const double w = 1.0 - z;
  for (int k = 1; k <= m; ++k) {
    for (int j = k; j >= 1; --j) b[j] = w * b[j] + z * b[j - 1];
    b[0] *= w;
  }
  return b;
}

namespace detail {

/// Contracts a tensor with one weight vector per axis, last axis first.
inline double contract(std::vector<double> t, const std::vector<int>& sizes,
                       const std::vector<std::vector<double>>& w) {
  for (int d = static_cast<int>(sizes.size()) - 1; d >= 0; --d) {
    const std::size_t outer = t.size() / sizes[d];
    std::vector<double> next(outer, 0.0);
    for (std::size_t p = 0; p < outer; ++p) {
      double acc = 0.0;
      for (int j = 0; j < sizes[d]; ++j) acc += t[p * sizes[d] + j] * w[d][j];
      next[p] = acc;
    }
    t = std::move(next);
  }
  return t[0];
}

inline Vec to_unit(const BernsteinFit& fit, const Vec& x) {
  require(x.size() == fit.dims, "bernstein: point dimension mismatch");
  Vec z(fit.dims);
  for (int d = 0; d < fit.dims; ++d) {
    const double u = (x(d) - fit.box_lo(d)) / (fit.box_hi(d) - fit.box_lo(d));
    if (!(u >= -1e-12 && u <= 1.0 + 1e-12)) throw ContractViolation("bernstein: point outside the box");
    z(d) = std::clamp(u, 0.0, 1.0);
  }
  return z;
}

}  // namespace detail

inline BernsteinFit bernstein_fit(const std::function<double(const Vec&)>& phi, const Vec& box_lo,
                                  const Vec& box_hi, int m) {
  const int n = static_cast<int>(box_lo.size());
  require(m >= 1, "bernstein_fit: degree must be >= 1");
  require(n >= 1 && n <= 4, "bernstein_fit: dimension must be between 1 and 4");
  require(box_hi.size() == n, "bernstein_fit: box bounds differ in dimension");
  for (int d = 0; d < n; ++d) require(box_lo(d) < box_hi(d), "bernstein_fit: empty box");
  const double count = std::pow(m + 1.0, n);
  require(count <= kBernsteinMaxCoefficients, "bernstein_fit: coefficient tensor too large");

  BernsteinFit fit{m, n, std::vector<double>(static_cast<std::size_t>(count)), box_lo, box_hi};
  Vec x(n);
  for (std::size_t flat = 0; flat < fit.coeffs.size(); ++flat) {
    std::size_t rest = flat;
    for (int d = n - 1; d >= 0; --d) {
      const int j = static_cast<int>(rest % (m + 1));
      rest /= (m + 1);
      x(d) = box_lo(d) + (box_hi(d) - box_lo(d)) * static_cast<double>(j) / m;
    }
    const double v = phi(x);
    if (!std::isfinite(v)) throw NumericalFailure("bernstein_fit: non-finite sample");
    fit.coeffs[flat] = v;
  }
  return fit;
}

inline double bernstein_eval(const BernsteinFit& fit, const Vec& x) {
  const Vec z = detail::to_unit(fit, x);
  std::vector<std::vector<double>> w;
  for (int d = 0; d < fit.dims; ++d) w.push_back(bernstein_basis(fit.degree, z(d)));
  return detail::contract(fit.coeffs, std::vector<int>(fit.dims, fit.degree + 1), w);
}

/// Exact gradient of the polynomial via coefficient differences:
/// d/dz_i = m sum (c_{..j+1..} - c_{..j..}) B^{m-1}_j(z_i) x other bases.
inline Vec bernstein_grad(const BernsteinFit& fit, const Vec& x) {
  const Vec z = detail::to_unit(fit, x);
  const int m = fit.degree;
  const int n = fit.dims;
  std::vector<std::vector<double>> full, reduced;
  for (int d = 0; d < n; ++d) {
    full.push_back(bernstein_basis(m, z(d)));
    reduced.push_back(bernstein_basis(m - 1, z(d)));
  }
  Vec g(n);
  for (int i = 0; i < n; ++i) {
    // stride of axis i in the flattened tensor
    std::size_t stride = 1;
    for (int d = n - 1; d > i; --d) stride *= (m + 1);
    const std::size_t outer = fit.coeffs.size() / (stride * (m + 1));
    std::vector<double> diff(outer * m * stride);
    for (std::size_t o = 0; o < outer; ++o)
      for (int j = 0; j < m; ++j)
        for (std::size_t s = 0; s < stride; ++s) {
          const std::size_t base = o * (m + 1) * stride;
          diff[(o * m + j) * stride + s] =
              fit.coeffs[base + (j + 1) * stride + s] - fit.coeffs[base + j * stride + s];
        }
    std::vector<int> sizes(n, m + 1);
    sizes[i] = m;
    std::vector<std::vector<double>> w = full;
    w[i] = reduced[i];
    g(i) = m * detail::contract(std::move(diff), sizes, w) / (fit.box_hi(i) - fit.box_lo(i));
  }
  return g;
}

struct BernsteinErrors {
  double sup_val_err = 0.0;
  double sup_grad_err = 0.0;
  long probes = 0;
};

namespace detail {

inline double radical_inverse(std::size_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

/// Probe points in [0,1]^N: an even lattice (N = 1) or a Halton set, plus the
/// midpoints of the Bernstein lattice when there are not too many of them.
inline std::vector<Vec> bernstein_probes(int n, int m, long count) {
  std::vector<Vec> pts;
  if (n == 1) {
    for (long k = 0; k < count; ++k) pts.push_back(Vec::Constant(1, static_cast<double>(k) / (count - 1)));
  } else {
    static constexpr unsigned primes[4] = {2, 3, 5, 7};
    for (long k = 0; k < count; ++k) {
      Vec z(n);
      for (int d = 0; d < n; ++d) z(d) = radical_inverse(static_cast<std::size_t>(k + 1), primes[d]);
      pts.push_back(z);
    }
  }
  if (std::pow(static_cast<double>(m), n) <= 1e5) {
    const std::size_t total = static_cast<std::size_t>(std::pow(m, n));
    for (std::size_t flat = 0; flat < total; ++flat) {
      Vec z(n);
      std::size_t rest = flat;
      for (int d = n - 1; d >= 0; --d) {
        z(d) = (static_cast<double>(rest % m) + 0.5) / m;
        rest /= m;
      }
      pts.push_back(z);
    }
  }
  return pts;
}

}  // namespace detail

/// Sup-norm errors of the degree-m Bernstein fit and of its gradient, measured
/// on a dense probe set.
inline BernsteinErrors uniform_errors(const std::function<double(const Vec&)>& phi,
                                      const std::function<Vec(const Vec&)>& grad_phi,
                                      const Vec& box_lo, const Vec& box_hi, int m,
                                      long probe_count = 10001) {
  require(probe_count >= 2, "uniform_errors: need at least two probes");
  const int n = static_cast<int>(box_lo.size());
  const BernsteinFit fit = bernstein_fit(phi, box_lo, box_hi, m);
  const std::vector<Vec> probes = detail::bernstein_probes(n, m, probe_count);
  auto to_box = [&](const Vec& z) -> Vec {
    return box_lo + z.cwiseProduct(box_hi - box_lo);
  };

  // grad_phi must match central differences of phi
  for (std::size_t k = 0; k < probes.size(); k += std::max<std::size_t>(1, probes.size() / 7)) {
    const Vec x = to_box(probes[k].cwiseMax(0.01).cwiseMin(0.99));
    const Vec g = grad_phi(x);
    for (int d = 0; d < n; ++d) {
      const double h = 1e-6 * (box_hi(d) - box_lo(d));
      Vec xp = x, xm = x;
      xp(d) += h;
      xm(d) -= h;
      const double fd = (phi(xp) - phi(xm)) / (2.0 * h);
      require(std::abs(fd - g(d)) <= 1e-4 * (1.0 + std::abs(g(d))),
              "uniform_errors: grad_phi is inconsistent with phi");
    }
  }

  BernsteinErrors out;
  for (const Vec& z : probes) {
    const Vec x = to_box(z);
    out.sup_val_err = std::max(out.sup_val_err, std::abs(phi(x) - bernstein_eval(fit, x)));
    out.sup_grad_err =
        std::max(out.sup_grad_err, (grad_phi(x) - bernstein_grad(fit, x)).cwiseAbs().maxCoeff());
  }
  out.probes = static_cast<long>(probes.size());
  return out;
}

}  // namespace ergokit
