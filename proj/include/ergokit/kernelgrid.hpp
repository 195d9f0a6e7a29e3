#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "ergokit/bernstein.hpp"
#include "ergokit/grid.hpp"
#include "ergokit/norms.hpp"
#include "ergokit/parallel.hpp"

namespace ergokit {

/// Stationary vector of a row-stochastic matrix: solves
/// (I - P^T + 1 1^T) pi = 1, then polishes with a few power steps.
inline Vec stationary_distribution(const Mat& p) {
  const Eigen::Index n = p.rows();
  Mat a = Mat::Identity(n, n) - p.transpose();
  a.array() += 1.0;
  Eigen::PartialPivLU<Mat> lu(a);
  Vec pi = lu.solve(Vec::Ones(n));
  if (!pi.allFinite()) throw NumericalFailure("stationary_distribution: singular system");
  for (int it = 0; it < 3; ++it) {
    pi = p.transpose() * pi;
    pi /= pi.sum();
  }
  return pi;
}

/// Dominant left eigenvector of a nonnegative matrix, normalized to sum 1.
inline Vec dominant_left_vector(const Mat& k, int max_iter = 20000, double tol = 1e-15) {
  Vec pi = Vec::Constant(k.rows(), 1.0 / k.rows());
  for (int it = 0; it < max_iter; ++it) {
    Vec next = k.transpose() * pi;
    const double s = next.sum();
    if (!(s > 0.0)) throw NumericalFailure("dominant_left_vector: degenerate kernel");
    next /= s;
    const double diff = (next - pi).cwiseAbs().maxCoeff();
    pi = std::move(next);
    if (diff < tol) return pi;
  }
  return pi;
}

/// Builds the quadrature matrix K(i,j) = p(x_i, x_j) w_j of a model density.
///
/// The leak test measures the probability of leaving the grid in one step
/// under the discrete stationary law, sum_i pi_i (1 - rowsum_i); it must not
/// exceed `leak_tol`. The largest single-row leak is reported as well.
inline GridKernel discretize(const ModelSpec& model, GridSpec spec, bool normalize = true,
                             double leak_tol = 1e-8) {
  if (!model.has_density()) throw ContractViolation("discretize: model has no transition density");
  spec.dim = model.dim_state;
  GridKernel k;
  k.grid = Grid::make(spec);
  const Grid& g = *k.grid;
  const int n = g.size();
  k.matrix.resize(n, n);
  const Vec& w = g.quad_weights();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    for (int j = 0; j < n; ++j) k.matrix(i, j) = model.density(g.node(i), g.node(j)) * w(j);
  });
  k.density = model.density;

  const Vec rowsum = k.matrix.rowwise().sum();
  if ((rowsum.array() <= 0.0).any())
    throw GridTooSmall("discretize: a grid row carries no mass", 1.0);
  const Vec leak = (Vec::Ones(n) - rowsum).cwiseAbs();
  k.max_row_leak = leak.maxCoeff();
  Mat normalized = rowsum.cwiseInverse().asDiagonal() * k.matrix;
  const Vec pi = stationary_distribution(normalized);
  k.stationary_leak = pi.cwiseAbs().dot(leak);
  if (k.stationary_leak > leak_tol)
    throw GridTooSmall("discretize: grid too small, stationary leak " +
                           std::to_string(k.stationary_leak),
                       k.stationary_leak);
  if (normalize) {
    k.matrix = std::move(normalized);
    k.row_normalized = true;
    k.stationary = pi;
  } else {
    k.stationary = dominant_left_vector(k.matrix);
  }
  return k;
}

/// t-step kernel K^t, e.g. for models whose one-step law only has a density
/// after several steps. The stationary vector and leak figures carry over.
inline GridKernel kernel_power(const GridKernel& k, int steps) {
  require(steps >= 1, "kernel_power: steps must be >= 1");
  GridKernel out = k;
  for (int s = 1; s < steps; ++s) out.matrix = out.matrix * k.matrix;
  out.density = nullptr;
  return out;
}

/// C^1 product cutoff equal to 1 on the box |x_i| <= n and 0 outside
/// |x_i| <= n + 1, with a cubic smoothstep profile in between.
class CutoffFunction {
public:
  explicit CutoffFunction(double n) : n_(n) { require(n >= 0.0, "cutoff level must be >= 0"); }

  double level() const { return n_; }

  double profile(double r) const {
    const double u = std::clamp(std::abs(r) - n_, 0.0, 1.0);
    return 1.0 - (3.0 * u * u - 2.0 * u * u * u);
  }
  double profile_derivative(double r) const {
    const double u = std::abs(r) - n_;
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double slope = -(6.0 * u - 6.0 * u * u);
    return r > 0.0 ? slope : -slope;
  }

  double operator()(const Vec& x) const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) v *= profile(x(i));
    return v;
  }
  Vec grad(const Vec& x) const {
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double v = profile_derivative(x(i));
      for (Eigen::Index j = 0; j < x.size(); ++j)
        if (j != i) v *= profile(x(j));
      g(i) = v;
    }
    return g;
  }

private:
  double n_;
};

inline CutoffFunction smooth_cutoff(int n) {
  require(n >= 1, "smooth_cutoff: level must be >= 1");
  return CutoffFunction(n);
}

inline Vec cutoff_on(const Grid& g, const CutoffFunction& chi) {
  Vec out(g.size());
  for (int k = 0; k < g.size(); ++k) out(k) = chi(g.node(k));
  return out;
}

/// Entry (i,j) -> chi_n(x_i) K(i,j) chi_m(x_j).
inline GridKernel truncate_kernel(const GridKernel& k, int n, int m) {
  const Vec left = cutoff_on(*k.grid, CutoffFunction(n));
  const Vec right = cutoff_on(*k.grid, CutoffFunction(m));
  GridKernel out;
  out.grid = k.grid;
  out.matrix = left.asDiagonal() * k.matrix * right.asDiagonal();
  out.row_normalized = false;
  out.stochastic = false;
  out.weight_values = k.weight_values;
  out.density = k.density;
  return out;
}

struct TruncationError {
  double err_v = 0.0;
  double err_v1 = 0.0;
};

/// v- and (v,1)-operator norms of K - I_{chi_n} K I_{chi_m}.
inline TruncationError truncation_error(const GridKernel& k, int n, int m, const WeightFunction& v) {
  const Vec vw = weight_on(*k.grid, v);
  const Mat diff = k.matrix - truncate_kernel(k, n, m).matrix;
  TruncationError e;
  e.err_v = operator_v_norm(diff, vw);
  e.err_v1 = operator_v1_norm(*k.grid, diff, vw);
  return e;
}

struct SpectrumReport {
  std::vector<std::complex<double>> eigenvalues;  // top_k by modulus, descending
  double xi_eigen = 0.0;                          // largest modulus
  std::map<int, double> xi_power;                 // n -> ||K^n||_v^(1/n)
  double agreement = 0.0;  // relative gap between xi_power at the largest n and xi_eigen
};

inline std::vector<std::complex<double>> eigenvalues_by_modulus(const Mat& k) {
  Eigen::EigenSolver<Mat> es(k, false);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigensolve failed");
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::stable_sort(ev.begin(), ev.end(), [](auto a, auto b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
    return a.imag() > b.imag();
  });
  return ev;
}

/// Leading eigenvalues and two estimates of the spectral radius: the largest
/// eigenvalue modulus and ||K^n||_v^(1/n) for n in {8, 16, 32}.
inline SpectrumReport spectrum_and_radius(const Mat& k, const Vec& weight_values, int top_k) {
  require(k.rows() == k.cols(), "spectrum_and_radius: matrix must be square");
  require(top_k >= 1, "spectrum_and_radius: top_k must be >= 1");
  SpectrumReport r;
  auto ev = eigenvalues_by_modulus(k);
  r.xi_eigen = std::abs(ev.front());
  ev.resize(std::min<std::size_t>(ev.size(), top_k));
  r.eigenvalues = std::move(ev);
  Mat power = k;
  int n = 1;
  for (int target : {8, 16, 32}) {
    while (n < target) {
      power = power * power;
      n *= 2;
    }
    r.xi_power[n] = std::pow(operator_v_norm(power, weight_values), 1.0 / n);
  }
  const double last = r.xi_power.rbegin()->second;
  r.agreement = r.xi_eigen > 0.0 ? std::abs(last - r.xi_eigen) / r.xi_eigen : std::abs(last);
  return r;
}

struct SpectralProjection {
  int rank = 0;
  Mat projection;
};

/// Eigenprojection onto the invariant subspace of eigenvalues inside the disk
/// |z - center| < radius: Pi = V_S (W_S^T V_S)^{-1} W_S^T with right (V) and
/// left (W) eigenvectors of the enclosed eigenvalues.
inline SpectralProjection spectral_projection(const Mat& k, std::complex<double> center,
                                              double radius) {
  require(k.rows() == k.cols(), "spectral_projection: matrix must be square");
  require(radius > 0.0, "spectral_projection: radius must be positive");
  const Eigen::Index n = k.rows();
  Eigen::EigenSolver<Mat> right(k, true), left(k.transpose(), true);
  if (right.info() != Eigen::Success || left.info() != Eigen::Success)
    throw NumericalFailure("spectral_projection: eigensolve failed");

  auto select = [&](const Eigen::EigenSolver<Mat>& es) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = std::abs(es.eigenvalues()(i) - center);
      if (std::abs(d - radius) < 1e-8)
        throw NumericalFailure("spectral_projection: eigenvalue on the cluster boundary");
      if (d < radius) idx.push_back(i);
    }
    return idx;
  };
  const auto ri = select(right);
  const auto li = select(left);
  if (ri.size() != li.size())
    throw NumericalFailure("spectral_projection: left and right clusters differ in size");
  SpectralProjection out;
  out.rank = static_cast<int>(ri.size());
  if (ri.empty()) {
    out.projection = Mat::Zero(n, n);
    return out;
  }
  Eigen::MatrixXcd vs(n, ri.size()), ws(n, li.size());
  for (std::size_t c = 0; c < ri.size(); ++c) {
    vs.col(c) = right.eigenvectors().col(ri[c]);
    ws.col(c) = left.eigenvectors().col(li[c]);
  }
  const Eigen::MatrixXcd gram = ws.transpose() * vs;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
  if (!lu.isInvertible()) throw NumericalFailure("spectral_projection: defective cluster");
  const Eigen::MatrixXcd pi = vs * lu.solve(ws.transpose());
  out.projection = pi.real();
  return out;
}

/// P~ = P - 1 (x) pi: subtracts the stationary law from every row.
inline GridKernel center_kernel(const GridKernel& k) {
  if (!k.stationary) throw ContractViolation("center_kernel: stationary vector missing");
  GridKernel out = k;
  out.matrix.rowwise() -= k.stationary->transpose();
  out.row_normalized = false;
  out.stochastic = false;
  return out;
}

/// sum_i s_i (r_i . f): left functions are columns of `left`, right measures
/// (already multiplied by quadrature weights) columns of `right`.
struct FiniteRankKernel {
  Mat left;
  Mat right;

  int rank() const { return static_cast<int>(left.cols()); }
  Vec apply(const Vec& f) const { return left * (right.transpose() * f); }
  Mat dense() const { return left * right.transpose(); }
};

struct FiniteRankApprox {
  FiniteRankKernel kernel;
  double err_v1 = 0.0;
  double err_v = 0.0;
};

/// Separable approximation of the chi_n-truncated kernel: fits a degree-m
/// Bernstein polynomial to r_v(x, y) = p(x, y) v(y) on [-(n+1), n+1]^(2l),
/// multiplies by chi_n(x) chi_n(y) / v(y), and factors over the x-basis.
inline FiniteRankApprox finite_rank_approx(const GridKernel& k, const WeightFunction& v, int m,
                                           int n) {
  if (!k.density) throw ContractViolation("finite_rank_approx: kernel has no underlying density");
  require(n >= 1, "finite_rank_approx: box level must be >= 1");
  const Grid& g = *k.grid;
  const int dim = g.dim();
  require(g.lo() <= -(n + 1.0) && g.hi() >= n + 1.0, "finite_rank_approx: box exceeds the grid");
  const double half = n + 1.0;

  const Vec lo = Vec::Constant(2 * dim, -half), hi = Vec::Constant(2 * dim, half);
  auto rv = [&](const Vec& xy) { return k.density(xy.head(dim), xy.tail(dim)) * v(xy.tail(dim)); };
  const BernsteinFit fit = bernstein_fit(rv, lo, hi, m);

  // basis values of the nodes, B(node, multi-index) with the first axis slowest
  const int per = m + 1;
  const int blocks = dim == 1 ? per : per * per;
  const int size = g.size();
  const CutoffFunction chi(n);
  Mat basis = Mat::Zero(size, blocks);
  for (int node = 0; node < size; ++node) {
    const Vec& x = g.node(node);
    if (chi(x) == 0.0) continue;
    std::vector<std::vector<double>> b;
    for (int d = 0; d < dim; ++d) b.push_back(bernstein_basis(m, (x(d) + half) / (2.0 * half)));
    for (int c = 0; c < blocks; ++c)
      basis(node, c) = dim == 1 ? b[0][c] : b[0][c / per] * b[1][c % per];
  }
  Mat coeffs(blocks, blocks);
  for (int r = 0; r < blocks; ++r)
    for (int c = 0; c < blocks; ++c) coeffs(r, c) = fit.coeffs[static_cast<std::size_t>(r) * blocks + c];

  const Vec chiv = cutoff_on(g, chi);
  const Vec vw = weight_on(g, v);
  const Vec right_scale = chiv.cwiseProduct(g.quad_weights()).cwiseQuotient(vw);

  FiniteRankApprox out;
  out.kernel.left = chiv.asDiagonal() * basis;
  out.kernel.right = right_scale.asDiagonal() * (basis * coeffs.transpose());

  // reference uses the raw quadrature matrix p(x_i, x_j) w_j
  Mat reference(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      reference(i, j) = chiv(i) * k.density(g.node(i), g.node(j)) * g.quad_weights()(j) * chiv(j);
  const Mat diff = reference - out.kernel.dense();
  out.err_v = operator_v_norm(diff, vw);
  out.err_v1 = operator_v1_norm(g, diff, vw);
  return out;
}

}  // namespace ergokit
