#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ergokit/model.hpp"
#include "ergokit/weight.hpp"

namespace ergokit {

struct GridSpec {
  double lo = -8.0;
  double hi = 8.0;
  int points = 401;  // nodes per axis
  int dim = 1;
};

/// Uniform tensor grid on [lo, hi]^dim with trapezoid quadrature weights.
/// Nodes are stored row-major: the first coordinate varies slowest.
class Grid {
public:
  explicit Grid(GridSpec spec) : spec_(spec) {
    require(spec.dim == 1 || spec.dim == 2, "grids support dimension 1 or 2");
    require(spec.points >= 3, "grids need at least 3 points per axis");
    require(spec.lo < spec.hi, "grid requires lo < hi");
    step_ = (spec.hi - spec.lo) / (spec.points - 1);
    axis_.resize(spec.points);
    axis_w_.resize(spec.points);
    for (int i = 0; i < spec.points; ++i) {
      axis_[i] = spec.lo + i * step_;
      axis_w_[i] = (i == 0 || i == spec.points - 1) ? 0.5 * step_ : step_;
    }
    axis_.back() = spec.hi;
    const int n = size();
    nodes_.reserve(n);
    weights_.resize(n);
    for (int k = 0; k < n; ++k) {
      Vec x(spec.dim);
      double w = 1.0;
      for (int d = 0; d < spec.dim; ++d) {
        const int i = axis_index(k, d);
        x(d) = axis_[i];
        w *= axis_w_[i];
      }
      nodes_.push_back(std::move(x));
      weights_(k) = w;
    }
  }

  static std::shared_ptr<const Grid> make(GridSpec spec) {
    return std::make_shared<const Grid>(spec);
  }

  int dim() const { return spec_.dim; }
  int points() const { return spec_.points; }
  int size() const { return spec_.dim == 1 ? spec_.points : spec_.points * spec_.points; }
  double step() const { return step_; }
  double lo() const { return spec_.lo; }
  double hi() const { return spec_.hi; }
  const GridSpec& spec() const { return spec_; }
  const std::vector<Vec>& nodes() const { return nodes_; }
  const Vec& node(int k) const { return nodes_[k]; }
  const Vec& quad_weights() const { return weights_; }
  const std::vector<double>& axis() const { return axis_; }

  /// Index of node k along axis d.
  int axis_index(int k, int d) const {
    if (spec_.dim == 1) return k;
    return d == 0 ? k / spec_.points : k % spec_.points;
  }
  /// Flat index of the neighbour of k shifted by `delta` along axis d.
  int shifted(int k, int d, int delta) const {
    if (spec_.dim == 1) return k + delta;
    return d == 0 ? k + delta * spec_.points : k + delta;
  }

  /// Index of the node closest to x.
  int nearest(const Vec& x) const {
    require(x.size() == spec_.dim, "grid lookup: dimension mismatch");
    int k = 0;
    for (int d = 0; d < spec_.dim; ++d) {
      int i = static_cast<int>(std::lround((x(d) - spec_.lo) / step_));
      i = std::clamp(i, 0, spec_.points - 1);
      k = (d == 0) ? i : k * spec_.points + i;
    }
    return k;
  }

private:
  GridSpec spec_;
  double step_ = 0.0;
  std::vector<double> axis_;
  std::vector<double> axis_w_;
  std::vector<Vec> nodes_;
  Vec weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Values of a function on grid nodes, optionally with its partial derivatives.
struct GridFunction {
  GridPtr grid;
  Vec values;
  std::vector<Vec> derivs;  // empty, or one vector per axis

  bool has_derivs() const { return !derivs.empty(); }
};

inline GridFunction sample(GridPtr grid, const std::function<double(const Vec&)>& f) {
  GridFunction g{grid, Vec(grid->size()), {}};
  for (int k = 0; k < grid->size(); ++k) g.values(k) = f(grid->node(k));
  return g;
}

/// Samples f and attaches analytic partial derivatives.
inline GridFunction sample(GridPtr grid, const std::function<double(const Vec&)>& f,
                           const std::function<Vec(const Vec&)>& grad) {
  GridFunction g = sample(grid, f);
  g.derivs.assign(grid->dim(), Vec(grid->size()));
  for (int k = 0; k < grid->size(); ++k) {
    const Vec d = grad(grid->node(k));
    for (int a = 0; a < grid->dim(); ++a) g.derivs[a](k) = d(a);
  }
  return g;
}

/// Partial derivative along `axis` of node values: central differences inside,
/// second-order one-sided differences at the boundary.
inline Vec grid_derivative(const Grid& grid, const Vec& values, int axis) {
  const int n = grid.size();
  const int p = grid.points();
  const double h = grid.step();
  Vec out(n);
  for (int k = 0; k < n; ++k) {
    const int i = grid.axis_index(k, axis);
    if (i == 0) {
      out(k) = (-3.0 * values(k) + 4.0 * values(grid.shifted(k, axis, 1)) -
                values(grid.shifted(k, axis, 2))) / (2.0 * h);
    } else if (i == p - 1) {
      out(k) = (3.0 * values(k) - 4.0 * values(grid.shifted(k, axis, -1)) +
                values(grid.shifted(k, axis, -2))) / (2.0 * h);
    } else {
      out(k) = (values(grid.shifted(k, axis, 1)) - values(grid.shifted(k, axis, -1))) / (2.0 * h);
    }
  }
  return out;
}

/// Row-wise derivative of a kernel matrix with respect to the row node.
inline Mat grid_row_derivative(const Grid& grid, const Mat& k, int axis) {
  const int n = grid.size();
  const int p = grid.points();
  const double h = grid.step();
  Mat out(k.rows(), k.cols());
  for (int r = 0; r < n; ++r) {
    const int i = grid.axis_index(r, axis);
    if (i == 0) {
      out.row(r) = (-3.0 * k.row(r) + 4.0 * k.row(grid.shifted(r, axis, 1)) -
                    k.row(grid.shifted(r, axis, 2))) / (2.0 * h);
    } else if (i == p - 1) {
      out.row(r) = (3.0 * k.row(r) - 4.0 * k.row(grid.shifted(r, axis, -1)) +
                    k.row(grid.shifted(r, axis, -2))) / (2.0 * h);
    } else {
      out.row(r) = (k.row(grid.shifted(r, axis, 1)) - k.row(grid.shifted(r, axis, -1))) / (2.0 * h);
    }
  }
  return out;
}

/// Attaches finite-difference partial derivatives to a grid function.
inline GridFunction differentiate(GridFunction g) {
  g.derivs.clear();
  for (int a = 0; a < g.grid->dim(); ++a) g.derivs.push_back(grid_derivative(*g.grid, g.values, a));
  return g;
}

/// Weight v evaluated on the nodes of a grid.
inline Vec weight_on(const Grid& grid, const WeightFunction& v) {
  Vec out(grid.size());
  for (int k = 0; k < grid.size(); ++k) out(k) = v(grid.node(k));
  return out;
}

/// Discretized transition kernel: matrix(i, j) ~ p(x_i, x_j) w_j.
struct GridKernel {
  GridPtr grid;
  Mat matrix;
  bool row_normalized = false;
  bool stochastic = true;  // false for centered / truncated variants
  std::optional<Vec> stationary;
  std::optional<Vec> weight_values;
  std::function<double(const Vec&, const Vec&)> density;  // when built from one
  double max_row_leak = 0.0;
  double stationary_leak = 0.0;

  int size() const { return static_cast<int>(matrix.rows()); }
};

}  // namespace ergokit
