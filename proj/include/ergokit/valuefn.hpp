#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ergokit/grid.hpp"
#include "ergokit/norms.hpp"
#include "ergokit/semigroup.hpp"

namespace ergokit {

struct SolveMode {
  enum class Kind { automatic, series, linear_solve };
  Kind kind = Kind::automatic;
  long t_max = 0;  // series only; 0 selects the horizon from the fitted decay rate
  double tol = 1e-10;

  static SolveMode series(long t_max, double tol) { return {Kind::series, t_max, tol}; }
  static SolveMode linear() { return {Kind::linear_solve, 0, 1e-10}; }
};

/// Grids up to this many nodes are solved directly in automatic mode.
inline constexpr int kDirectSolveLimit = 2000;

struct ValueSolution {
  Vec h;
  double mean_c = 0.0;
  std::optional<long> truncation_t;  // empty for the linear solve
  double residual_vnorm = 0.0;
  std::optional<double> alpha;
  double pi_h = 0.0;  // pi(h), zero for Poisson solutions
  std::vector<double> term_norms;

  double at(const Grid& g, const Vec& x) const { return h(g.nearest(x)); }
};

namespace detail {

/// Horizon ceil(log(tol / b0) / log(rho0)) from a fit of the first few term
/// norms of t -> ||A^t g||_v.
inline long fitted_horizon(const Mat& a, const Vec& g, const Vec& vw, double tol) {
  std::vector<std::pair<double, double>> series;
  Vec term = g;
  for (int t = 0; t < 12; ++t) {
    const double nrm = v_norm(term, vw);
    if (nrm < tol || nrm == 0.0) break;
    series.emplace_back(t, nrm);
    term = a * term;
  }
  if (series.size() < 3) return 64;
  const DecayFit fit = decay_rate_fit(series);
  if (!(fit.rho0 < 1.0)) return 100000;
  return std::max<long>(1, static_cast<long>(std::ceil(std::log(tol / fit.b0) / std::log(fit.rho0))) + 1);
}

inline bool use_series(const SolveMode& mode, int size) {
  if (mode.kind == SolveMode::Kind::series) return true;
  if (mode.kind == SolveMode::Kind::linear_solve) return false;
  return size > kDirectSolveLimit;
}

}  // namespace detail

/// Solves h - P h = c - cbar with pi(h) = 0 on a grid kernel.
inline ValueSolution poisson_solve(const GridKernel& k, const Vec& c, const WeightFunction& v,
                                   SolveMode mode = {}) {
  if (!k.stationary) throw ContractViolation("poisson_solve: stationary vector missing");
  require(c.size() == k.size(), "poisson_solve: cost has the wrong length");
  const Vec& pi = *k.stationary;
  const Vec vw = weight_on(*k.grid, v);
  ValueSolution sol;
  sol.mean_c = pi.dot(c);
  const Vec g = (c.array() - sol.mean_c).matrix();

  if (detail::use_series(mode, k.size())) {
    const long t_max = mode.t_max > 0 ? mode.t_max : detail::fitted_horizon(k.matrix, g, vw, mode.tol);
    sol.h = Vec::Zero(k.size());
    Vec term = g;
    bool converged = false;
    for (long t = 0; t <= t_max; ++t) {
      const double nrm = v_norm(term, vw);
      sol.term_norms.push_back(nrm);
      sol.h += term;
      if (nrm < mode.tol) {
        sol.truncation_t = t;
        converged = true;
        break;
      }
      term = k.matrix * term;
    }
    if (!converged)
      throw NonConvergence("poisson_solve: series did not reach tolerance", sol.term_norms.back());
  } else {
    Mat a = Mat::Identity(k.size(), k.size()) - k.matrix;
    a += Vec::Ones(k.size()) * pi.transpose();
    sol.h = Eigen::PartialPivLU<Mat>(a).solve(g);
    if (!sol.h.allFinite()) throw NumericalFailure("poisson_solve: singular system");
  }
  const Vec resid = sol.h - k.matrix * sol.h - g;
  sol.residual_vnorm = v_norm(resid, vw);
  sol.pi_h = pi.dot(sol.h);
  if (!detail::use_series(mode, k.size()) &&
      sol.residual_vnorm > 1e-6 * std::max(1.0, v_norm(g, vw)))
    throw NumericalFailure("poisson_solve: singular system");
  return sol;
}

/// Solves h = c + alpha P h (the resolvent sum of alpha^t P^t c).
inline ValueSolution discounted_solve(const GridKernel& k, const Vec& c, double alpha,
                                      const WeightFunction& v, SolveMode mode = {}) {
  require(alpha >= 0.0 && alpha < 1.0, "discounted_solve: alpha must lie in [0, 1)");
  require(c.size() == k.size(), "discounted_solve: cost has the wrong length");
  const Vec vw = weight_on(*k.grid, v);
  ValueSolution sol;
  sol.alpha = alpha;
  if (k.stationary) sol.mean_c = k.stationary->dot(c);
  if (alpha == 0.0) {
    sol.h = c;
    sol.truncation_t = 0;
  } else if (detail::use_series(mode, k.size())) {
    const Mat a = alpha * k.matrix;
    const long t_max = mode.t_max > 0 ? mode.t_max : detail::fitted_horizon(a, c, vw, mode.tol);
    sol.h = Vec::Zero(k.size());
    Vec term = c;
    bool converged = false;
    for (long t = 0; t <= t_max; ++t) {
      const double nrm = v_norm(term, vw);
      sol.term_norms.push_back(nrm);
      sol.h += term;
      if (nrm < mode.tol) {
        sol.truncation_t = t;
        converged = true;
        break;
      }
      term = a * term;
    }
    if (!converged)
      throw NonConvergence("discounted_solve: series did not reach tolerance", sol.term_norms.back());
  } else {
    const Mat a = Mat::Identity(k.size(), k.size()) - alpha * k.matrix;
    sol.h = Eigen::PartialPivLU<Mat>(a).solve(c);
    if (!sol.h.allFinite()) throw NumericalFailure("discounted_solve: singular system");
  }
  sol.residual_vnorm = v_norm(c + alpha * (k.matrix * sol.h) - sol.h, vw);
  if (k.stationary) sol.pi_h = k.stationary->dot(sol.h);
  return sol;
}

struct CltVariance {
  double sigma2 = 0.0;
  double raw = 0.0;
  bool clipped = false;  // raw value was negative and has been set to zero
};

/// Asymptotic variance pi(h^2) - pi((P h)^2) of a Poisson solution.
inline CltVariance clt_variance(const GridKernel& k, const ValueSolution& sol) {
  if (!k.stationary) throw ContractViolation("clt_variance: stationary vector missing");
  require(sol.h.size() == k.size(), "clt_variance: solution has the wrong length");
  const Vec& pi = *k.stationary;
  const Vec ph = k.matrix * sol.h;
  CltVariance out;
  out.raw = pi.dot(sol.h.cwiseAbs2()) - pi.dot(ph.cwiseAbs2());
  out.clipped = out.raw < 0.0;
  out.sigma2 = std::max(0.0, out.raw);
  return out;
}

struct GradientSeries {
  EstimatorResult estimate;
  std::vector<double> term_norms;  // |mean of alpha^t S(t)^T grad c(X(t))|
  long truncation_t = 0;
};

namespace detail {

/// Paths are grouped in fixed-size chunks so partial sums do not depend on the
/// number of workers.
inline constexpr long kChunk = 1024;

inline GradientSeries gradient_series(const ModelSpec& model,
                                      const std::function<Vec(const Vec&)>& grad_c, double alpha,
                                      const Vec& x, long t_max, double tol, long n,
                                      std::uint64_t seed) {
  require(t_max >= 1, "gradient series: t_max must be >= 1");
  require(n >= 2, "gradient series: need at least two samples");
  require(x.size() == model.dim_state, "gradient series: state dimension mismatch");
  const int dim = model.dim_state;
  const long chunks = (n + kChunk - 1) / kChunk;

  // pass 1: mean of every term up to t_max
  std::vector<Mat> partial(chunks, Mat::Zero(dim, t_max + 1));
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    const long lo = static_cast<long>(c) * kChunk, hi = std::min(n, lo + kChunk);
    for (long k = lo; k < hi; ++k) {
      RandomStream rs = RandomStream::substream(seed, k);
      Vec y = x;
      Mat s = Mat::Identity(dim, dim);
      double disc = 1.0;
      for (long t = 0; t <= t_max; ++t) {
        if (t > 0) {
          joint_step(model, y, s, sample_noise(model, rs), t);
          disc *= alpha;
        }
        partial[c].col(t) += disc * (s.transpose() * grad_c(y));
      }
    }
  });
  Mat total = Mat::Zero(dim, t_max + 1);
  for (const Mat& p : partial) total += p;
  total /= static_cast<double>(n);

  GradientSeries out;
  long stop = -1;
  for (long t = 0; t <= t_max; ++t) {
    out.term_norms.push_back(total.col(t).norm());
    if (out.term_norms.back() < tol) {
      stop = t;
      break;
    }
  }
  if (stop < 0) throw NonConvergence("gradient series: terms did not decay below tol", out.term_norms.back());
  out.truncation_t = stop;

  // pass 2: per-path sums through the truncation horizon
  std::vector<Vec> sums(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    RandomStream rs = RandomStream::substream(seed, k);
    Vec y = x;
    Mat s = Mat::Identity(dim, dim);
    double disc = 1.0;
    Vec acc = Vec::Zero(dim);
    for (long t = 0; t <= stop; ++t) {
      if (t > 0) {
        joint_step(model, y, s, sample_noise(model, rs), t);
        disc *= alpha;
      }
      acc += disc * (s.transpose() * grad_c(y));
    }
    sums[k] = acc;
  });
  out.estimate = summarize(sums, seed);
  return out;
}

}  // namespace detail

/// Monte Carlo estimate of grad h(x) = sum_t Q^t grad c(x).
inline GradientSeries poisson_gradient(const ModelSpec& model,
                                       const std::function<Vec(const Vec&)>& grad_c, const Vec& x,
                                       long t_max, double tol, long n, std::uint64_t seed) {
  return detail::gradient_series(model, grad_c, 1.0, x, t_max, tol, n, seed);
}

/// Monte Carlo estimate of grad h_alpha(x) = sum_t alpha^t Q^t grad c(x).
inline GradientSeries discounted_gradient(const ModelSpec& model,
                                          const std::function<Vec(const Vec&)>& grad_c,
                                          double alpha, const Vec& x, long t_max, double tol,
                                          long n, std::uint64_t seed) {
  require(alpha > 0.0 && alpha < 1.0, "discounted_gradient: alpha must lie in (0, 1)");
  return detail::gradient_series(model, grad_c, alpha, x, t_max, tol, n, seed);
}

}  // namespace ergokit
