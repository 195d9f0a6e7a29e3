// Acceptance run: one PASS/FAIL line per criterion, each with its measured
// numbers and wall time. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ergokit.hpp"

using namespace ergokit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<double> numbers;  // stochastic outputs, compared across worker counts
};

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<Outcome()> run;
};

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

void note(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [miss]");
}

Vec point(double x) { return Vec::Constant(1, x); }

const GridSpec kGrid{-8.0, 8.0, 401, 1};
const WeightFunction kWeight = quadratic_weight(0.1);
constexpr std::uint64_t kSeed = 20240611;

Outcome sensitivity_exactness() {
  Outcome o;
  const ModelSpec m = ar1(0.5, 1.0);
  const PathBundle p = simulate_path(m, point(1.0), 50, kSeed);
  double worst = 0.0;
  for (long t = 0; t <= 50; ++t) worst = std::max(worst, std::abs(p.sens[t](0, 0) - std::pow(0.5, t)));
  note(o, worst <= 1e-12, "max |S(t) - rho^t| = " + num(worst));
  for (const Vec& x : p.states) o.numbers.push_back(x(0));
  return o;
}

Outcome gradient_identity() {
  Outcome o;
  const std::vector<ModelSpec> models = {ar1(0.5, 1.0), tanh1(0.5, 1.0), rotcon2(0.5, 0.7, 1.0)};
  const std::vector<TestFunction> fs = {test_functions::linear(), test_functions::square(),
                                        test_functions::tanh_sum()};
  int passed = 0, total = 0;
  double worst_ratio = 0.0;
  std::string failures;
  for (const ModelSpec& m : models) {
    const Vec x = m.dim_state == 1 ? point(1.0) : Vec((Vec(2) << 1.0, -0.5).finished());
    for (const TestFunction& f : fs) {
      for (long t : {1L, 2L, 5L}) {
        const std::uint64_t seed = kSeed + 1000 * total;
        const GradientCheckReport r = gradient_identity_check(m, f, x, t, 100000, 1e-4, seed);
        ++total;
        passed += r.pass;
        if (!r.pass) failures += " " + m.name + "/" + f.name + "/t=" + std::to_string(t);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          worst_ratio = std::max(worst_ratio, std::abs(r.discrepancy(i)) / r.tolerance(i));
          o.numbers.push_back(r.pathwise.value(i));
          o.numbers.push_back(r.fd.value(i));
        }
      }
    }
  }
  note(o, passed == total,
       std::to_string(passed) + "/" + std::to_string(total) + " configurations pass, worst discrepancy/tolerance " +
           num(worst_ratio) + failures);
  return o;
}

Outcome poisson_closed_forms() {
  Outcome o;
  const GridKernel k = discretize(ar1(0.5, 1.0), kGrid);
  const Grid& g = *k.grid;
  Vec c1(g.size()), c2(g.size());
  for (int i = 0; i < g.size(); ++i) {
    c1(i) = g.node(i)(0);
    c2(i) = c1(i) * c1(i);
  }
  const ValueSolution s1 = poisson_solve(k, c1, kWeight, SolveMode::linear());
  const ValueSolution s2 = poisson_solve(k, c2, kWeight, SolveMode::linear());
  const double h1 = s1.at(g, point(1.0)), h2 = s2.at(g, point(1.0));
  note(o, std::abs(h1 - 2.0) <= 1e-4, "h(1) for c=x: " + num(h1));
  note(o, std::abs(h2 + 0.4444) <= 1e-3, "h(1) for c=x^2: " + num(h2));
  const double resid = std::max(s1.residual_vnorm, s2.residual_vnorm);
  note(o, resid <= 1e-6, "residual v-norm " + num(resid));
  const double pih = std::max(std::abs(s1.pi_h), std::abs(s2.pi_h));
  note(o, pih <= 1e-8, "|pi(h)| " + num(pih));
  return o;
}

Outcome discounted_closed_form() {
  Outcome o;
  const ModelSpec m = ar1(0.5, 1.0);
  const GridKernel k = discretize(m, kGrid);
  const Grid& g = *k.grid;
  Vec c(g.size());
  for (int i = 0; i < g.size(); ++i) c(i) = g.node(i)(0);
  const ValueSolution s = discounted_solve(k, c, 0.9, kWeight, SolveMode::linear());
  const double h1 = s.at(g, point(1.0));
  const double exact = 1.0 / 0.55;
  note(o, std::abs(h1 - exact) <= 1e-4, "h_alpha(1) = " + num(h1));
  note(o, s.residual_vnorm <= 1e-6, "fixed-point residual " + num(s.residual_vnorm));
  const GradientSeries gs =
      discounted_gradient(m, [](const Vec& x) -> Vec { return Vec::Ones(x.size()); }, 0.9, point(1.0), 200, 1e-13,
                          1000, kSeed);
  const double err = std::abs(gs.estimate.scalar() - exact);
  note(o, err <= 1e-11 && gs.estimate.scalar_se() == 0.0,
       "gradient series " + num(gs.estimate.scalar()) + " (error " + num(err) + ", SE " +
           num(gs.estimate.scalar_se()) + ")");
  o.numbers.push_back(gs.estimate.scalar());
  return o;
}

Outcome spectral_structure() {
  Outcome o;
  const ModelSpec m = ar1(0.5, 1.0);
  const double expect[4] = {1.0, 0.5, 0.25, 0.125};
  std::vector<std::vector<double>> tops;
  for (int points : {201, 401}) {
    const GridKernel k = discretize(m, {-8.0, 8.0, points, 1});
    const auto ev = eigenvalues_by_modulus(k.matrix);
    double worst = 0.0;
    std::vector<double> top;
    for (int i = 0; i < 4; ++i) {
      top.push_back(ev[i].real());
      worst = std::max(worst, std::abs(ev[i] - expect[i]));
    }
    tops.push_back(top);
    note(o, worst <= 1e-3, "M=" + std::to_string(points) + " top-4 error " + num(worst));
    if (points == 401) {
      const SpectrumReport r = spectrum_and_radius(center_kernel(k).matrix, weight_on(*k.grid, kWeight), 4);
      note(o, std::abs(r.xi_eigen - 0.5) <= 1e-3, "centered radius " + num(r.xi_eigen));
      note(o, r.agreement <= 0.02, "power estimate " + num(r.xi_power.rbegin()->second) + " (relative gap " +
                                       num(r.agreement) + ")");
    }
  }
  double drift = 0.0;
  for (int i = 0; i < 4; ++i) drift = std::max(drift, std::abs(tops[0][i] - tops[1][i]));
  note(o, drift <= 2e-3, "M=201 vs M=401 gap " + num(drift));
  return o;
}

Outcome geometric_decay() {
  Outcome o;
  const GridKernel k = discretize(ar1(0.5, 1.0), kGrid);
  const Grid& g = *k.grid;
  const Vec vw = weight_on(g, kWeight);
  const Mat centered = center_kernel(k).matrix;
  Vec term(g.size());
  for (int i = 0; i < g.size(); ++i) term(i) = g.node(i)(0);
  std::vector<std::pair<double, double>> sv, sv1;
  for (int t = 0; t <= 30; ++t) {
    sv.emplace_back(t, v_norm(term, vw));
    sv1.emplace_back(t, sobolev_norm_v1(term, {grid_derivative(g, term, 0)}, vw));
    term = centered * term;
  }
  const DecayFit fv = decay_rate_fit(sv), fv1 = decay_rate_fit(sv1);
  note(o, std::abs(fv.rho0 - 0.5) <= 0.025 && fv.r_squared > 0.99,
       "v-norm rho0 " + num(fv.rho0) + " R^2 " + num(fv.r_squared));
  note(o, std::abs(fv1.rho0 - 0.5) <= 0.05, "(v,1)-norm rho0 " + num(fv1.rho0));
  return o;
}

Outcome drift_verification() {
  Outcome o;
  const ModelSpec m = ar1(0.5, 1.0);
  const ScalarField V = [](const Vec& x) { return 0.1 * x.squaredNorm(); };
  const GeneratorQuadrature gen(m);
  double worst = 0.0;
  for (int i = 0; i <= 1200; ++i) {
    const double x = -6.0 + 0.01 * i;
    const double exact = -0.06875 * x * x + 0.5 * std::log(1.25);
    worst = std::max(worst, std::abs(gen(V, point(x)) - exact));
  }
  note(o, worst <= 1e-6, "max |H(V) - closed form| on [-6,6] " + num(worst));
  const DV3Spec spec{V, [](const Vec& x) { return 1.0 + x.squaredNorm(); }, 0.05, std::nullopt, std::nullopt};
  const DV3Report rep = dv3_check(m, spec, Grid::make({-6.0, 6.0, 1201, 1}), {1.0, 0.5});
  const DV3EtaResult& base = rep.per_eta[0];
  note(o, std::abs(base.min_c_radius - 2.94) <= 0.02, "min C radius " + num(base.min_c_radius));
  note(o, std::abs(base.min_b - 0.162) <= 0.002, "min b " + num(base.min_b));
  note(o, rep.per_eta[1].pass, std::string("eta=0.5 ") + (rep.per_eta[1].pass ? "passes" : "fails"));
  return o;
}

Outcome bernstein_rates() {
  Outcome o;
  const Vec lo = Vec::Zero(1), hi = Vec::Ones(1);
  const BernsteinErrors sq = uniform_errors([](const Vec& z) { return z(0) * z(0); },
                                            [](const Vec& z) -> Vec { return 2.0 * z; }, lo, hi, 10);
  note(o, std::abs(sq.sup_val_err - 0.025) <= 1e-9, "z^2 at m=10: " + num(sq.sup_val_err));
  const double pi = std::numbers::pi;
  double prev_v = INFINITY, prev_g = INFINITY;
  bool decreasing = true;
  std::string trail;
  for (int deg : {8, 16, 32, 64}) {
    const BernsteinErrors e =
        uniform_errors([pi](const Vec& z) { return std::sin(pi * z(0)); },
                       [pi](const Vec& z) -> Vec { return Vec::Constant(1, pi * std::cos(pi * z(0))); }, lo, hi, deg);
    decreasing = decreasing && e.sup_val_err < prev_v && e.sup_grad_err < prev_g;
    prev_v = e.sup_val_err;
    prev_g = e.sup_grad_err;
    trail += " " + num(e.sup_val_err) + "/" + num(e.sup_grad_err);
  }
  note(o, decreasing, "sin(pi z) value/gradient errors:" + trail);
  const Vec lo2 = Vec::Constant(2, -1.0), hi2 = Vec::Constant(2, 2.0);
  const BernsteinErrors aff =
      uniform_errors([](const Vec& z) { return 0.3 - 1.7 * z(0) + 2.5 * z(1); },
                     [](const Vec&) -> Vec { return (Vec(2) << -1.7, 2.5).finished(); }, lo2, hi2, 7);
  note(o, aff.sup_val_err <= 1e-13 && aff.sup_grad_err <= 1e-12,
       "affine reproduction " + num(aff.sup_val_err) + "/" + num(aff.sup_grad_err));
  return o;
}

Outcome truncation() {
  Outcome o;
  const GridKernel k = discretize(ar1(0.5, 1.0), kGrid);
  std::vector<double> err;
  std::string trail;
  for (int n = 2; n <= 6; ++n) {
    err.push_back(truncation_error(k, n, n, kWeight).err_v1);
    trail += " n=" + std::to_string(n) + ":" + num(err.back());
  }
  bool decreasing = true;
  for (int i = 1; i < 4; ++i) decreasing = decreasing && err[i] < err[i - 1];
  note(o, decreasing, "err_v1 strictly decreasing over n=2..5:" + trail);
  note(o, err[4] < 1e-6, "err_v1(6) = " + num(err[4]) + " vs 1e-6");
  RandomStream rs(kSeed);
  double slope = 0.0;
  const CutoffFunction chi = smooth_cutoff(3);
  for (int i = 0; i < 10000; ++i) {
    const Vec x = (Vec(2) << rs.uniform(-5.0, 5.0), rs.uniform(-5.0, 5.0)).finished();
    slope = std::max(slope, chi.grad(x).cwiseAbs().maxCoeff());
  }
  note(o, slope <= 2.0, "max cutoff partial " + num(slope));
  return o;
}

Outcome lyapunov_exponents() {
  Outcome o;
  const double log_half = std::log(0.5);
  const ExponentEstimate a = lyapunov_exponent(ar1(0.5, 1.0), point(1.0), 200, 100, kSeed);
  const ExponentEstimate r =
      lyapunov_exponent(rotcon2(0.5, 0.7, 1.0), (Vec(2) << 1.0, 0.0).finished(), 200, 100, kSeed);
  const ExponentEstimate p2 = mean_exponent(ar1(0.5, 1.0), point(1.0), 200, 2.0, 100, kSeed);
  note(o, std::abs(a.value - log_half) <= 1e-10, "ar1 " + num(a.value));
  note(o, std::abs(r.value - log_half) <= 1e-10, "rotcon2 " + num(r.value));
  note(o, std::abs(p2.value - 2.0 * log_half) <= 1e-10, "ar1 p=2 mean exponent " + num(p2.value));
  o.numbers = {a.value, r.value, p2.value};
  return o;
}

Outcome clt() {
  Outcome o;
  const GridKernel k = discretize(ar1(0.5, 1.0), kGrid);
  Vec c(k.size());
  for (int i = 0; i < k.size(); ++i) c(i) = k.grid->node(i)(0);
  const CltVariance v = clt_variance(k, poisson_solve(k, c, kWeight, SolveMode::linear()));
  note(o, std::abs(v.sigma2 - 4.0) <= 0.01, "sigma^2 = " + num(v.sigma2));
  return o;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "sensitivity exactness", 1.0, sensitivity_exactness},
      {2, "gradient identity", 30.0, gradient_identity},
      {3, "Poisson closed forms", 5.0, poisson_closed_forms},
      {4, "discounted closed form", 5.0, discounted_closed_form},
      {5, "spectral structure", 10.0, spectral_structure},
      {6, "geometric decay", 5.0, geometric_decay},
      {7, "drift verification", 5.0, drift_verification},
      {8, "Bernstein approximation", 10.0, bernstein_rates},
      {9, "truncation", 10.0, truncation},
      {10, "Lyapunov exponents", 5.0, lyapunov_exponents},
      {11, "CLT variance", 2.0, clt},
  };

  int failures = 0;
  std::vector<std::vector<double>> baseline(criteria.size());
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const Criterion& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) note(o, false, "runtime over the " + num(c.budget_s) + " s budget");
    baseline[i] = o.numbers;
    failures += !o.pass;
    std::printf("criterion %2d %-4s %s: %s (%.2f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }

  // determinism: stochastic criteria rerun with 1 and 4 workers
  bool identical = true;
  std::string which;
  for (const char* threads : {"1", "4"}) {
    setenv("ERGOKIT_THREADS", threads, 1);
    for (std::size_t i = 0; i < criteria.size(); ++i) {
      if (baseline[i].empty()) continue;
      Outcome o;
      try {
        o = criteria[i].run();
      } catch (const std::exception&) {
      }
      if (o.numbers != baseline[i]) {
        identical = false;
        which += " " + std::to_string(criteria[i].id) + "@" + threads;
      }
    }
  }
  unsetenv("ERGOKIT_THREADS");
  failures += !identical;
  std::printf("criterion 12 %-4s determinism: criteria 1, 2, 4, 10 rerun with ERGOKIT_THREADS in {1, 4}%s\n",
              identical ? "PASS" : "FAIL", identical ? " reproduce every number" : (" differ at" + which).c_str());
  return failures;
}
