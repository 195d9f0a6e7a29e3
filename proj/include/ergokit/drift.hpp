#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "ergokit/estimator.hpp"
#include "ergokit/grid.hpp"
#include "ergokit/parallel.hpp"
#include "ergokit/quadrature.hpp"

namespace ergokit {

using ScalarField = std::function<double(const Vec&)>;

/// Quadrature nodes per noise coordinate, and the doubled count used by the
/// tail certificate.
inline constexpr int kGeneratorNodes = 64;
inline constexpr double kTailTolerance = 1e-8;

namespace detail {

inline double log_expectation(const ModelSpec& model, const ScalarField& f, const Vec& x,
                              const NoiseRule& rule) {
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(rule.points.size());
  for (std::size_t k = 0; k < rule.points.size(); ++k) {
    terms[k] = rule.log_weights[k] + f(model.map(x, rule.points[k]));
    top = std::max(top, terms[k]);
  }
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

inline std::string describe(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ")";
  return os.str();
}

}  // namespace detail

/// Evaluates log(P e^F) - F at x by quadrature over the noise, in the log
/// domain. The 64-node result must agree with the 128-node one to a relative
/// 1e-8, otherwise the integral is treated as divergent.
class GeneratorQuadrature {
public:
  explicit GeneratorQuadrature(const ModelSpec& model)
      : model_(model),
        coarse_(noise_rule(model.noise, model.dim_noise, kGeneratorNodes)),
        fine_(noise_rule(model.noise, model.dim_noise, 2 * kGeneratorNodes)) {}

  double log_pe(const ScalarField& f, const Vec& x) const {
    require(x.size() == model_.dim_state, "nonlinear_generator: state dimension mismatch");
    const double a = detail::log_expectation(model_, f, x, coarse_);
    const double b = detail::log_expectation(model_, f, x, fine_);
    if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a - b) > kTailTolerance)
      throw NumericalFailure("nonlinear_generator: P e^F diverges or fails the tail test at x=" +
                             detail::describe(x));
    return b;
  }

  double operator()(const ScalarField& f, const Vec& x) const { return log_pe(f, x) - f(x); }

private:
  const ModelSpec& model_;
  NoiseRule coarse_;
  NoiseRule fine_;
};

inline double nonlinear_generator(const ModelSpec& model, const ScalarField& f, const Vec& x) {
  return GeneratorQuadrature(model)(f, x);
}

/// H(F) at every node of a grid, by noise quadrature.
inline GridFunction nonlinear_generator(const ModelSpec& model, const ScalarField& f, GridPtr grid) {
  const GeneratorQuadrature gen(model);
  GridFunction out{grid, Vec(grid->size()), {}};
  parallel_for(static_cast<std::size_t>(grid->size()),
               [&](std::size_t k) { out.values(k) = gen(f, grid->node(k)); });
  return out;
}

/// H(F) on a grid kernel: log sum_j K(i,j) e^{F_j} - F_i.
inline GridFunction nonlinear_generator(const GridKernel& k, const GridFunction& f) {
  require(f.values.size() == k.size(), "nonlinear_generator: shape mismatch");
  require((k.matrix.array() >= 0.0).all(), "nonlinear_generator: kernel must be nonnegative");
  GridFunction out{k.grid, Vec(k.size()), {}};
  const double top = f.values.maxCoeff();
  const Vec scaled = (f.values.array() - top).exp().matrix();
  const Vec pe = k.matrix * scaled;
  for (int i = 0; i < k.size(); ++i) {
    if (!(pe(i) > 0.0)) throw NumericalFailure("nonlinear_generator: P e^F vanishes on a row");
    out.values(i) = std::log(pe(i)) + top - f.values(i);
  }
  return out;
}

/// Monte Carlo H(F)(x): log of the sample mean of e^{F(X(1))}, with a
/// delta-method standard error.
inline EstimatorResult nonlinear_generator_mc(const ModelSpec& model, const ScalarField& f,
                                              const Vec& x, long n, std::uint64_t seed) {
  require(n >= 2, "nonlinear_generator_mc: need at least two samples");
  require(x.size() == model.dim_state, "nonlinear_generator_mc: state dimension mismatch");
  std::vector<double> logs(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    RandomStream rs = RandomStream::substream(seed, k);
    logs[k] = f(model.map(x, sample_noise(model, rs)));
  });
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> scaled(n);
  for (long k = 0; k < n; ++k) scaled[k] = std::exp(logs[k] - top);
  const EstimatorResult r = summarize(scaled, seed);
  EstimatorResult out = r;
  out.value(0) = std::log(r.scalar()) + top - f(x);
  out.std_error(0) = r.scalar_se() / r.scalar();
  return out;
}

/// Df = P f - f.
inline GridFunction generator_apply(const GridKernel& k, const GridFunction& f) {
  require(f.values.size() == k.size(), "generator_apply: shape mismatch");
  return {k.grid, k.matrix * f.values - f.values, {}};
}

/// Drift condition H(V) <= -delta W + b 1_C with C the closed ball of radius
/// C_radius. Unset b / C_radius are replaced by the minimal feasible values.
struct DV3Spec {
  ScalarField V;
  ScalarField W;
  double delta = 0.0;
  std::optional<double> b;
  std::optional<double> c_radius;
};

struct DV3EtaResult {
  double eta = 1.0;
  double max_violation = 0.0;  // max_x H(eta V) + eta delta W - eta b 1_C
  double min_b = 0.0;          // smallest b for the tested C (in eta = 1 units)
  double min_c_radius = 0.0;   // smallest ball radius outside which the drift holds
  bool feasible = true;        // violations stay away from the grid boundary
  bool pass = false;
  Vec excess;                  // H(eta V) + eta delta W on the nodes
};

struct DV3Report {
  std::vector<DV3EtaResult> per_eta;
  double b_used = 0.0;
  double c_radius_used = 0.0;
  bool pass = false;
};

namespace detail {

/// Outermost root of the excess along the grid, interpolated between the last
/// violating node and its outward neighbour (1-D); the largest violating
/// radius otherwise. Returns -1 when nothing violates.
inline double violating_radius(const Grid& g, const Vec& excess, bool& touches_boundary) {
  touches_boundary = false;
  double r = -1.0;
  for (int k = 0; k < g.size(); ++k) {
    if (excess(k) <= 0.0) continue;
    const Vec& x = g.node(k);
    double rk = x.norm();
    for (int d = 0; d < g.dim(); ++d) {
      const int i = g.axis_index(k, d);
      if (i == 0 || i == g.points() - 1) touches_boundary = true;
    }
    if (g.dim() == 1) {
      const int step = x(0) >= 0.0 ? 1 : -1;
      const int nb = k + step;
      if (nb >= 0 && nb < g.size() && excess(nb) <= 0.0) {
        const double frac = excess(k) / (excess(k) - excess(nb));
        rk = std::abs(x(0) + frac * (g.node(nb)(0) - x(0)));
      }
    }
    r = std::max(r, rk);
  }
  return r;
}

}  // namespace detail

/// Evaluates the (scaled) drift inequality on every grid node for each eta.
inline DV3Report dv3_check(const ModelSpec& model, const DV3Spec& spec, GridPtr grid,
                           const std::vector<double>& etas = {1.0}) {
  require(spec.delta > 0.0, "dv3_check: delta must be positive");
  require(!etas.empty(), "dv3_check: no eta requested");
  for (double e : etas) require(e > 0.0 && e <= 1.0, "dv3_check: eta must lie in (0, 1]");
  if (spec.b) require(*spec.b >= 0.0, "dv3_check: b must be nonnegative");
  if (spec.c_radius) {
    require(*spec.c_radius >= 0.0, "dv3_check: C radius must be nonnegative");
    require(*spec.c_radius + grid->step() < std::min(-grid->lo(), grid->hi()),
            "dv3_check: grid does not cover C with a margin");
  }
  const Grid& g = *grid;
  Vec w(g.size());
  for (int k = 0; k < g.size(); ++k) {
    w(k) = spec.W(g.node(k));
    require(w(k) >= 1.0, "dv3_check: W must be >= 1");
  }
  const GeneratorQuadrature gen(model);

  DV3Report rep;
  for (double eta : etas) {
    DV3EtaResult r;
    r.eta = eta;
    const ScalarField scaled = [&](const Vec& x) { return eta * spec.V(x); };
    r.excess.resize(g.size());
    parallel_for(static_cast<std::size_t>(g.size()), [&](std::size_t k) {
      r.excess(k) = gen(scaled, g.node(k)) + eta * spec.delta * w(k);
    });
    bool boundary = false;
    r.min_c_radius = std::max(0.0, detail::violating_radius(g, r.excess, boundary));
    r.feasible = !boundary;
    rep.per_eta.push_back(std::move(r));
  }

  // C and b default to the minimal values of the first requested eta
  DV3EtaResult& base = rep.per_eta.front();
  rep.c_radius_used = spec.c_radius.value_or(base.min_c_radius);
  double b0 = 0.0;
  for (int k = 0; k < g.size(); ++k)
    if (g.node(k).norm() <= rep.c_radius_used) b0 = std::max(b0, base.excess(k) / base.eta);
  rep.b_used = spec.b.value_or(b0);

  rep.pass = true;
  for (DV3EtaResult& r : rep.per_eta) {
    r.min_b = 0.0;
    r.max_violation = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.size(); ++k) {
      const bool in_c = g.node(k).norm() <= rep.c_radius_used;
      if (in_c) r.min_b = std::max(r.min_b, r.excess(k) / r.eta);
      r.max_violation = std::max(r.max_violation, r.excess(k) - (in_c ? r.eta * rep.b_used : 0.0));
    }
    r.pass = r.feasible && r.max_violation <= 1e-12;
    rep.pass = rep.pass && r.pass;
  }
  return rep;
}

}  // namespace ergokit
