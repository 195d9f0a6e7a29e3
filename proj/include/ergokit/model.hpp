#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ergokit/errors.hpp"
#include "ergokit/random.hpp"

namespace ergokit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class NoiseKind { gaussian, uniform, tabulated };

/// Law of one coordinate of the i.i.d. noise vector N(t).
struct NoiseLaw {
  NoiseKind kind = NoiseKind::gaussian;
  double lo = 0.0;  // uniform support
  double hi = 1.0;
  std::vector<double> values;  // tabulated atoms
  std::vector<double> probs;

  static NoiseLaw gaussian() { return {}; }
  static NoiseLaw uniform(double lo, double hi) {
    require(lo < hi, "uniform noise requires lo < hi");
    return {NoiseKind::uniform, lo, hi, {}, {}};
  }
  static NoiseLaw tabulated(std::vector<double> values, std::vector<double> probs) {
    require(!values.empty() && values.size() == probs.size(),
            "tabulated noise requires matching non-empty values/probs");
    double total = 0.0;
    for (double p : probs) {
      require(p >= 0.0, "tabulated noise probabilities must be nonnegative");
      total += p;
    }
    require(std::abs(total - 1.0) < 1e-12, "tabulated noise probabilities must sum to 1");
    return {NoiseKind::tabulated, 0.0, 0.0, std::move(values), std::move(probs)};
  }

  double draw(RandomStream& rs) const {
    switch (kind) {
      case NoiseKind::gaussian:
        return rs.normal();
      case NoiseKind::uniform:
        return rs.uniform(lo, hi);
      case NoiseKind::tabulated: {
        double u = rs.unit();
        for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
          if (u < probs[k]) return values[k];
          u -= probs[k];
        }
        return values.back();
      }
    }
    return 0.0;
  }
};

enum class MatrixNorm { spectral, frobenius, infinity };

inline const char* to_string(MatrixNorm n) {
  switch (n) {
    case MatrixNorm::spectral: return "spectral";
    case MatrixNorm::frobenius: return "frobenius";
    case MatrixNorm::infinity: return "infinity";
  }
  return "?";
}

inline double matrix_norm(const Mat& m, MatrixNorm kind = MatrixNorm::spectral) {
  switch (kind) {
    case MatrixNorm::spectral:
      if (m.size() == 1) return std::abs(m(0, 0));
      return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
    case MatrixNorm::frobenius:
      return m.norm();
    case MatrixNorm::infinity:
      return m.cwiseAbs().rowwise().sum().maxCoeff();
  }
  return 0.0;
}

/// The state-space model X(t+1) = a(X(t), N(t+1)).
///
/// `jacobian(x, n)` follows the convention entry (i,j) = d a_j / d x_i, so the
/// sensitivity recursion uses its transpose.
struct ModelSpec {
  std::string name;
  int dim_state = 1;
  int dim_noise = 1;
  std::function<Vec(const Vec&, const Vec&)> map;
  std::function<Mat(const Vec&, const Vec&)> jacobian;
  NoiseLaw noise;
  std::function<double(const Vec&, const Vec&)> density;  // p(x, y), optional
  std::optional<double> jacobian_bound;
  std::vector<std::pair<std::string, double>> params;  // descriptor for reports

  bool has_density() const { return static_cast<bool>(density); }
};

inline Vec eval_map(const ModelSpec& m, const Vec& x, const Vec& n) {
  require(x.size() == m.dim_state, "eval_map: state dimension mismatch");
  require(n.size() == m.dim_noise, "eval_map: noise dimension mismatch");
  return m.map(x, n);
}

inline Mat eval_jacobian(const ModelSpec& m, const Vec& x, const Vec& n) {
  require(x.size() == m.dim_state, "eval_jacobian: state dimension mismatch");
  require(n.size() == m.dim_noise, "eval_jacobian: noise dimension mismatch");
  return m.jacobian(x, n);
}

inline Vec sample_noise(const ModelSpec& m, RandomStream& rs) {
  Vec n(m.dim_noise);
  for (int i = 0; i < m.dim_noise; ++i) n(i) = m.noise.draw(rs);
  return n;
}

/// Central finite-difference Jacobian in the (i,j) = d a_j / d x_i layout,
/// step h_i = 1e-6 (1 + |x_i|).
inline Mat jacobian_fd(const ModelSpec& m, const Vec& x, const Vec& n) {
  Mat out(m.dim_state, m.dim_state);
  for (int i = 0; i < m.dim_state; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x(i)));
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    out.row(i) = ((m.map(xp, n) - m.map(xm, n)) / (xp(i) - xm(i))).transpose();
  }
  return out;
}

namespace detail {
inline void check_contraction(double rho) {
  require(std::abs(rho) < 1.0, "builtin models require |rho| < 1");
}

inline double gaussian_density(const Vec& y, const Vec& mean, double sigma) {
  const double z2 = (y - mean).squaredNorm() / (sigma * sigma);
  const double norm = std::pow(2.0 * std::numbers::pi * sigma * sigma, 0.5 * y.size());
  return std::exp(-0.5 * z2) / norm;
}
}  // namespace detail

/// a(x, n) = rho x + sigma n.
inline ModelSpec ar1(double rho, double sigma) {
  detail::check_contraction(rho);
  require(sigma >= 0.0, "ar1: sigma must be nonnegative");
  ModelSpec m;
  m.name = "ar1";
  m.map = [rho, sigma](const Vec& x, const Vec& n) -> Vec { return rho * x + sigma * n; };
  m.jacobian = [rho](const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, rho); };
  if (sigma > 0.0)
    m.density = [rho, sigma](const Vec& x, const Vec& y) {
      return detail::gaussian_density(y, rho * x, sigma);
    };
  m.jacobian_bound = std::abs(rho);
  m.params = {{"rho", rho}, {"sigma", sigma}};
  return m;
}

/// a(x, n) = rho tanh(x) + sigma n.
inline ModelSpec tanh1(double rho, double sigma) {
  detail::check_contraction(rho);
  require(sigma >= 0.0, "tanh1: sigma must be nonnegative");
  ModelSpec m;
  m.name = "tanh1";
  m.map = [rho, sigma](const Vec& x, const Vec& n) -> Vec {
    return rho * x.array().tanh().matrix() + sigma * n;
  };
  m.jacobian = [rho](const Vec& x, const Vec&) -> Mat {
    const double t = std::tanh(x(0));
    return Mat::Constant(1, 1, rho * (1.0 - t * t));
  };
  if (sigma > 0.0)
    m.density = [rho, sigma](const Vec& x, const Vec& y) {
      return detail::gaussian_density(y, rho * x.array().tanh().matrix(), sigma);
    };
  m.jacobian_bound = std::abs(rho);
  m.params = {{"rho", rho}, {"sigma", sigma}};
  return m;
}

inline Mat rotation(double theta) {
  Mat r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

/// a(x, n) = rho R(theta) x + sigma n in the plane.
inline ModelSpec rotcon2(double rho, double theta, double sigma) {
  detail::check_contraction(rho);
  require(sigma >= 0.0, "rotcon2: sigma must be nonnegative");
  ModelSpec m;
  m.name = "rotcon2";
  m.dim_state = 2;
  m.dim_noise = 2;
  const Mat a = rho * rotation(theta);
  m.map = [a, sigma](const Vec& x, const Vec& n) -> Vec { return a * x + sigma * n; };
  // d a_j / d x_i = a(j, i)
  const Mat jac = a.transpose();
  m.jacobian = [jac](const Vec&, const Vec&) -> Mat { return jac; };
  if (sigma > 0.0)
    m.density = [a, sigma](const Vec& x, const Vec& y) {
      return detail::gaussian_density(y, a * x, sigma);
    };
  m.jacobian_bound = std::abs(rho);
  m.params = {{"rho", rho}, {"theta", theta}, {"sigma", sigma}};
  return m;
}

/// Replaces the noise law of a model. The closed-form density of the builtins
/// assumes Gaussian noise, so it is dropped for any other law.
inline ModelSpec with_noise(ModelSpec m, NoiseLaw law) {
  if (law.kind != NoiseKind::gaussian) m.density = nullptr;
  m.noise = std::move(law);
  return m;
}

}  // namespace ergokit
