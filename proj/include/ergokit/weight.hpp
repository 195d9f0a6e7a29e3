#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "ergokit/model.hpp"

namespace ergokit {

/// Weight v(x) = exp(eta V(x)) with V >= 0, so v >= 1.
struct WeightFunction {
  std::function<double(const Vec&)> V;
  std::function<Vec(const Vec&)> grad_V;
  double eta = 1.0;
  std::string label;

  double log_value(const Vec& x) const { return eta * V(x); }
  double operator()(const Vec& x) const { return std::exp(eta * V(x)); }
  Vec grad(const Vec& x) const { return eta * (*this)(x) * grad_V(x); }

  WeightFunction scaled(double new_eta) const {
    require(new_eta > 0.0 && new_eta <= 1.0, "weight eta must lie in (0, 1]");
    WeightFunction w = *this;
    w.eta = new_eta;
    return w;
  }
};

/// V(x) = eps |x|^2.
inline WeightFunction quadratic_weight(double eps, double eta = 1.0) {
  require(eps >= 0.0, "quadratic_weight: eps must be nonnegative");
  require(eta > 0.0 && eta <= 1.0, "weight eta must lie in (0, 1]");
  return {[eps](const Vec& x) { return eps * x.squaredNorm(); },
          [eps](const Vec& x) -> Vec { return 2.0 * eps * x; }, eta,
          std::to_string(eps) + "*|x|^2"};
}

/// v == 1.
inline WeightFunction unit_weight() {
  return {[](const Vec&) { return 0.0; },
          [](const Vec& x) -> Vec { return Vec::Zero(x.size()); }, 1.0, "1"};
}

}  // namespace ergokit
