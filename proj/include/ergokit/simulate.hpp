#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ergokit/estimator.hpp"
#include "ergokit/model.hpp"
#include "ergokit/parallel.hpp"
#include "ergokit/weight.hpp"

namespace ergokit {

/// States beyond this Euclidean norm abort a simulation.
inline constexpr double kDivergenceRadius = 1e12;

/// One trajectory X(0..T) together with the sensitivities S(t) = dX(t)/dX(0)
/// and the noise that drove it.
struct PathBundle {
  std::vector<Vec> states;
  std::vector<Mat> sens;
  std::vector<Vec> noise;  // noise[t] drives the step t -> t+1
  std::uint64_t seed = 0;
  std::string model_id;
};

struct ExponentEstimate {
  double value = 0.0;
  long horizon = 0;
  long replications = 0;
  double std_error = 0.0;
  MatrixNorm norm_used = MatrixNorm::spectral;
};

namespace detail {

inline void check_state(const Vec& x, long t) {
  if (!x.allFinite()) throw DivergedTrajectory("non-finite state", t);
  if (x.norm() > kDivergenceRadius) throw DivergedTrajectory("state left the divergence ball", t);
}

/// One joint step: S <- grad_a(x, n)^T S, then x <- a(x, n). `t` is the index
/// of the new state, used in error reports.
inline void joint_step(const ModelSpec& m, Vec& x, Mat& s, const Vec& n, long t) {
  s = m.jacobian(x, n).transpose() * s;
  x = m.map(x, n);
  check_state(x, t);
}

inline void state_step(const ModelSpec& m, Vec& x, const Vec& n, long t) {
  x = m.map(x, n);
  check_state(x, t);
}

/// log ||S(T)|| along one replication, rescaling S when it nears the limits of
/// the floating-point range.
inline double log_sens_norm(const ModelSpec& m, const Vec& x0, long horizon, RandomStream& rs,
                            MatrixNorm norm) {
  Vec x = x0;
  Mat s = Mat::Identity(m.dim_state, m.dim_state);
  double log_scale = 0.0;
  for (long t = 0; t < horizon; ++t) {
    joint_step(m, x, s, sample_noise(m, rs), t + 1);
    const double mag = s.cwiseAbs().maxCoeff();
    if (mag == 0.0) return -std::numeric_limits<double>::infinity();
    if (mag < 1e-150 || mag > 1e150) {
      s /= mag;
      log_scale += std::log(mag);
    }
  }
  return log_scale + std::log(matrix_norm(s, norm));
}

inline double log_sum_exp(const std::vector<double>& a) {
  const double top = *std::max_element(a.begin(), a.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : a) acc += std::exp(v - top);
  return top + std::log(acc);
}

}  // namespace detail

inline PathBundle simulate_path(const ModelSpec& model, const Vec& x0, long horizon,
                                std::uint64_t seed) {
  require(horizon >= 0, "simulate_path: horizon must be nonnegative");
  require(x0.size() == model.dim_state, "simulate_path: initial state dimension mismatch");
  detail::check_state(x0, 0);
  PathBundle p;
  p.seed = seed;
  p.model_id = model.name;
  p.states.reserve(horizon + 1);
  p.sens.reserve(horizon + 1);
  p.noise.reserve(horizon);
  RandomStream rs(seed);
  Vec x = x0;
  Mat s = Mat::Identity(model.dim_state, model.dim_state);
  p.states.push_back(x);
  p.sens.push_back(s);
  for (long t = 0; t < horizon; ++t) {
    p.noise.push_back(sample_noise(model, rs));
    detail::joint_step(model, x, s, p.noise.back(), t + 1);
    p.states.push_back(x);
    p.sens.push_back(s);
  }
  return p;
}

/// Top Lyapunov exponent: average of (1/T) log ||S(T)|| over replications.
inline ExponentEstimate lyapunov_exponent(const ModelSpec& model, const Vec& x0, long horizon,
                                          long reps, std::uint64_t seed,
                                          MatrixNorm norm = MatrixNorm::spectral) {
  require(horizon >= 1, "lyapunov_exponent: horizon must be >= 1");
  require(reps >= 1, "lyapunov_exponent: reps must be >= 1");
  std::vector<double> per_rep(reps);
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t k) {
    RandomStream rs = RandomStream::substream(seed, k);
    per_rep[k] = detail::log_sens_norm(model, x0, horizon, rs, norm) / static_cast<double>(horizon);
  });
  const EstimatorResult r = summarize(per_rep, seed);
  return {r.scalar(), horizon, reps, r.scalar_se(), norm};
}

/// p-th mean exponent (1/T) log E ||S(T)||^p, evaluated in the log domain.
inline ExponentEstimate mean_exponent(const ModelSpec& model, const Vec& x0, long horizon,
                                      double p, long reps, std::uint64_t seed,
                                      MatrixNorm norm = MatrixNorm::spectral) {
  require(p > 0.0, "mean_exponent: p must be positive");
  require(horizon >= 1, "mean_exponent: horizon must be >= 1");
  require(reps >= 1, "mean_exponent: reps must be >= 1");
  std::vector<double> logs(reps);
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t k) {
    RandomStream rs = RandomStream::substream(seed, k);
    logs[k] = p * detail::log_sens_norm(model, x0, horizon, rs, norm);
  });
  for (double l : logs)
    if (std::isnan(l)) throw DivergedTrajectory("non-finite sensitivity norm", horizon);
  const double n = static_cast<double>(reps);
  const double lse = detail::log_sum_exp(logs);
  const double value = (lse - std::log(n)) / static_cast<double>(horizon);

  // delta method on log of the sample mean of exp(logs - top)
  double se = 0.0;
  if (reps > 1 && std::isfinite(lse)) {
    const double top = *std::max_element(logs.begin(), logs.end());
    std::vector<double> scaled(reps);
    for (long k = 0; k < reps; ++k) scaled[k] = std::exp(logs[k] - top);
    const EstimatorResult r = summarize(scaled, seed);
    if (r.scalar() > 0.0) se = r.scalar_se() / r.scalar() / static_cast<double>(horizon);
  }
  return {value, horizon, reps, se, norm};
}

struct ContractionRow {
  Vec x0;
  double lhs = 0.0;  // E[v(X(t0))] + E[||S(t0)|| v(X(t0))]
  double lhs_se = 0.0;
  double ratio = 0.0;  // lhs / v(x0)^rho_exp
  double ratio_se = 0.0;
};

struct ContractionReport {
  std::vector<ContractionRow> rows;
  double k = 0.0;  // smallest constant with lhs <= k v^rho_exp on the set
  double k_se = 0.0;
  long t0 = 0;
  long reps = 0;
  double rho_exp = 1.0;
  std::uint64_t seed = 0;
};

/// Seed of the replication family used for the i-th initial point.
inline std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  return detail::splitmix64(seed ^ detail::splitmix64(0xc0ffee + index));
}

/// Estimates the sensitivity contraction bound
///   E_x v(X(t0)) + E_x ||S(t0)|| v(X(t0)) <= k v(x)^rho_exp
/// over a finite set of initial states.
inline ContractionReport contraction_diagnostic(const ModelSpec& model,
                                                const std::vector<Vec>& x0_set, long t0,
                                                long reps, const WeightFunction& v,
                                                double rho_exp, std::uint64_t seed,
                                                MatrixNorm norm = MatrixNorm::spectral) {
  require(t0 >= 0, "contraction_diagnostic: t0 must be nonnegative");
  require(reps >= 1, "contraction_diagnostic: reps must be >= 1");
  require(rho_exp > 0.0 && rho_exp <= 1.0, "contraction_diagnostic: rho_exp must lie in (0, 1]");
  require(!x0_set.empty(), "contraction_diagnostic: empty initial set");
  ContractionReport rep;
  rep.t0 = t0;
  rep.reps = reps;
  rep.rho_exp = rho_exp;
  rep.seed = seed;
  for (std::size_t i = 0; i < x0_set.size(); ++i) {
    const Vec& x0 = x0_set[i];
    require(x0.size() == model.dim_state, "contraction_diagnostic: state dimension mismatch");
    const std::uint64_t ps = point_seed(seed, i);
    std::vector<double> samples(reps);
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t k) {
      RandomStream rs = RandomStream::substream(ps, k);
      Vec x = x0;
      Mat s = Mat::Identity(model.dim_state, model.dim_state);
      for (long t = 0; t < t0; ++t) detail::joint_step(model, x, s, sample_noise(model, rs), t + 1);
      const double vx = v(x);
      samples[k] = vx + matrix_norm(s, norm) * vx;
    });
    const EstimatorResult r = summarize(samples, ps);
    ContractionRow row;
    row.x0 = x0;
    row.lhs = r.scalar();
    row.lhs_se = r.scalar_se();
    const double denom = std::pow(v(x0), rho_exp);
    row.ratio = row.lhs / denom;
    row.ratio_se = row.lhs_se / denom;
    if (rep.rows.empty() || row.ratio > rep.k) {
      rep.k = row.ratio;
      rep.k_se = row.ratio_se;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace ergokit
