#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ergokit/estimator.hpp"
#include "ergokit/simulate.hpp"

namespace ergokit {

enum class Growth { bounded, linear, quadratic };

inline const char* to_string(Growth g) {
  switch (g) {
    case Growth::bounded: return "bounded";
    case Growth::linear: return "linear";
    case Growth::quadratic: return "quadratic";
  }
  return "?";
}

/// A C^1 function on the state space together with its gradient.
struct TestFunction {
  std::function<double(const Vec&)> f;
  std::function<Vec(const Vec&)> grad_f;
  Growth growth = Growth::bounded;
  std::string name;

  double operator()(const Vec& x) const { return f(x); }
};

namespace test_functions {

/// sum_i x_i
inline TestFunction linear() {
  return {[](const Vec& x) { return x.sum(); },
          [](const Vec& x) -> Vec { return Vec::Ones(x.size()); }, Growth::linear, "x"};
}

/// |x|^2
inline TestFunction square() {
  return {[](const Vec& x) { return x.squaredNorm(); },
          [](const Vec& x) -> Vec { return 2.0 * x; }, Growth::quadratic, "x2"};
}

/// sum_i tanh(x_i)
inline TestFunction tanh_sum() {
  return {[](const Vec& x) { return x.array().tanh().sum(); },
          [](const Vec& x) -> Vec { return (1.0 - x.array().tanh().square()).matrix(); },
          Growth::bounded, "tanh"};
}

inline TestFunction constant(double kappa) {
  return {[kappa](const Vec&) { return kappa; },
          [](const Vec& x) -> Vec { return Vec::Zero(x.size()); }, Growth::bounded, "const"};
}

}  // namespace test_functions

/// Monte Carlo estimate of P^t f(x) = E_x f(X(t)).
inline EstimatorResult estimate_ptf(const ModelSpec& model, const TestFunction& f, const Vec& x,
                                    long t, long n, std::uint64_t seed) {
  require(n >= 2, "estimate_ptf: need at least two samples");
  require(t >= 0, "estimate_ptf: horizon must be nonnegative");
  require(x.size() == model.dim_state, "estimate_ptf: state dimension mismatch");
  std::vector<double> samples(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    RandomStream rs = RandomStream::substream(seed, k);
    Vec y = x;
    for (long s = 0; s < t; ++s) detail::state_step(model, y, sample_noise(model, rs), s + 1);
    samples[k] = f(y);
  });
  return summarize(samples, seed);
}

/// Monte Carlo estimate of Q^t g(x) = E_x[S(t)^T g(X(t))].
inline EstimatorResult estimate_qt_grad(const ModelSpec& model,
                                        const std::function<Vec(const Vec&)>& grad_f,
                                        const Vec& x, long t, long n, std::uint64_t seed) {
  require(n >= 2, "estimate_qt_grad: need at least two samples");
  require(t >= 0, "estimate_qt_grad: horizon must be nonnegative");
  require(x.size() == model.dim_state, "estimate_qt_grad: state dimension mismatch");
  std::vector<Vec> samples(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    RandomStream rs = RandomStream::substream(seed, k);
    Vec y = x;
    Mat s = Mat::Identity(model.dim_state, model.dim_state);
    for (long j = 0; j < t; ++j) detail::joint_step(model, y, s, sample_noise(model, rs), j + 1);
    samples[k] = s.transpose() * grad_f(y);
  });
  return summarize(samples, seed);
}

struct GradientCheckReport {
  EstimatorResult pathwise;  // Q^t grad f(x)
  EstimatorResult fd;        // central differences of P^t f under common random numbers
  Vec pooled_se;
  Vec fd_allowance;  // discretization + round-off allowance
  Vec discrepancy;
  Vec tolerance;
  bool pass = false;
};

/// Compares Q^t grad f(x) with central finite differences of x -> P^t f(x).
///
/// Every replication draws one noise panel and reuses it for x, x +/- h e_i
/// and x +/- 2h e_i, with h_i = fd_step (1 + |x_i|). The pass threshold is
/// 3 pooled standard errors plus |D(2h) - D(h)|, three times the leading
/// O(h^2) error of D(h), plus a round-off floor.
inline GradientCheckReport gradient_identity_check(const ModelSpec& model, const TestFunction& f,
                                                   const Vec& x, long t, long n, double fd_step,
                                                   std::uint64_t seed) {
  require(fd_step >= 1e-8, "gradient_identity_check: fd_step below 1e-8 is dominated by round-off");
  require(n >= 2, "gradient_identity_check: need at least two samples");
  require(t >= 0, "gradient_identity_check: horizon must be nonnegative");
  require(x.size() == model.dim_state, "gradient_identity_check: state dimension mismatch");
  const int dim = model.dim_state;
  Vec h(dim);
  for (int i = 0; i < dim; ++i) h(i) = fd_step * (1.0 + std::abs(x(i)));

  std::vector<Vec> path_samples(n), fd_samples(n), fd2_samples(n);
  std::vector<double> fmax(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    RandomStream rs = RandomStream::substream(seed, k);
    std::vector<Vec> panel;
    panel.reserve(t);
    for (long j = 0; j < t; ++j) panel.push_back(sample_noise(model, rs));

    Vec y = x;
    Mat s = Mat::Identity(dim, dim);
    for (long j = 0; j < t; ++j) detail::joint_step(model, y, s, panel[j], j + 1);
    path_samples[k] = s.transpose() * f.grad_f(y);

    auto terminal = [&](const Vec& start) {
      Vec z = start;
      for (long j = 0; j < t; ++j) detail::state_step(model, z, panel[j], j + 1);
      return f(z);
    };
    Vec d1(dim), d2(dim);
    double big = std::abs(f(y));
    for (int i = 0; i < dim; ++i) {
      Vec e = Vec::Zero(dim);
      e(i) = h(i);
      const double fp = terminal(x + e), fm = terminal(x - e);
      const double fp2 = terminal(x + 2.0 * e), fm2 = terminal(x - 2.0 * e);
      d1(i) = (fp - fm) / (2.0 * h(i));
      d2(i) = (fp2 - fm2) / (4.0 * h(i));
      big = std::max({big, std::abs(fp), std::abs(fm), std::abs(fp2), std::abs(fm2)});
    }
    fd_samples[k] = d1;
    fd2_samples[k] = d2;
    fmax[k] = big;
  });

  GradientCheckReport rep;
  rep.pathwise = summarize(path_samples, seed);
  rep.fd = summarize(fd_samples, seed);
  const EstimatorResult fd2 = summarize(fd2_samples, seed);
  double big = 0.0;
  for (double v : fmax) big = std::max(big, v);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  rep.pooled_se = (rep.pathwise.std_error.cwiseAbs2() + rep.fd.std_error.cwiseAbs2()).cwiseSqrt();
  rep.fd_allowance.resize(dim);
  for (int i = 0; i < dim; ++i)
    rep.fd_allowance(i) =
        std::abs(fd2.value(i) - rep.fd.value(i)) + 16.0 * eps * (1.0 + big) / h(i);
  rep.discrepancy = (rep.pathwise.value - rep.fd.value).cwiseAbs();
  rep.tolerance = 3.0 * rep.pooled_se + rep.fd_allowance;
  rep.pass = (rep.discrepancy.array() <= rep.tolerance.array()).all();
  return rep;
}

}  // namespace ergokit
