#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ergokit/kernelgrid.hpp"
#include "ergokit/norms.hpp"

using namespace ergokit;

namespace {

GridPtr line(double lo, double hi, int points) { return Grid::make({lo, hi, points, 1}); }

Mat random_matrix(int n, unsigned seed) {
  std::srand(seed);
  return Mat::Random(n, n);
}

}  // namespace

TEST(VNorm, LinearFunctionUnderQuadraticWeight) {
  const GridPtr g = line(-6.0, 6.0, 1201);
  const WeightFunction v = quadratic_weight(0.1);
  const GridFunction f = sample(g, [](const Vec& x) { return x(0); });
  // sup |x| exp(-0.1 x^2) = sqrt(5) exp(-1/2)
  EXPECT_NEAR(v_norm(f, v), std::sqrt(5.0) * std::exp(-0.5), 1e-3);
  EXPECT_NEAR(v_norm(f, v), 1.3562, 1e-3);
  EXPECT_DOUBLE_EQ(v_norm(f.values, weight_on(*g, v)), v_norm(f, v));
}

TEST(VNorm, ShapeMismatchIsRejected) {
  EXPECT_THROW(v_norm(Vec::Ones(3), Vec::Ones(4)), ContractViolation);
  EXPECT_THROW(v_norm(Vec(), Vec()), ContractViolation);
}

TEST(SobolevNorm, TakesTheLargerOfValueAndDerivative) {
  const GridPtr g = line(-3.0, 3.0, 601);
  const GridFunction f = sample(g, [](const Vec& x) { return std::sin(3.0 * x(0)); },
                                [](const Vec& x) -> Vec { return Vec::Constant(1, 3.0 * std::cos(3.0 * x(0))); });
  EXPECT_NEAR(sobolev_norm_v1(f, unit_weight()), 3.0, 1e-12);
  EXPECT_NEAR(v_norm(f, unit_weight()), 1.0, 1e-4);
  EXPECT_THROW(sobolev_norm_v1(sample(g, [](const Vec&) { return 1.0; }), unit_weight()), ContractViolation);

  const GridFunction fd = differentiate(sample(g, [](const Vec& x) { return std::sin(3.0 * x(0)); }));
  EXPECT_NEAR(sobolev_norm_v1(fd, unit_weight()), 3.0, 1e-3);
}

TEST(MeasureNorm, WeightedTotalVariation) {
  Vec mu(3), w(3);
  mu << 0.5, -0.25, 0.25;
  w << 1.0, 2.0, 4.0;
  EXPECT_DOUBLE_EQ(measure_v_norm(mu, w), 0.5 + 0.5 + 1.0);
  // duality: attained by h = v sign(mu), which has v-norm 1
  const Vec h = w.cwiseProduct(mu.cwiseSign());
  EXPECT_DOUBLE_EQ(v_norm(h, w), 1.0);
  EXPECT_DOUBLE_EQ(mu.dot(h), measure_v_norm(mu, w));
  EXPECT_THROW(measure_v_norm(Vec::Ones(2), Vec::Ones(3)), ContractViolation);
}

TEST(OperatorNorm, IdentityHasNormOne) {
  const Vec w = weight_on(*line(-5.0, 5.0, 51), quadratic_weight(0.2));
  EXPECT_DOUBLE_EQ(operator_v_norm(Mat::Identity(51, 51), w), 1.0);
  EXPECT_THROW(operator_v_norm(Mat::Identity(5, 5), Vec::Ones(4)), ContractViolation);
}

TEST(OperatorNorm, Ar1KernelEqualsMaximalDriftRatio) {
  const GridKernel k = discretize(ar1(0.5, 1.0), {-8.0, 8.0, 401, 1});
  const WeightFunction v = quadratic_weight(0.1);
  const Vec w = weight_on(*k.grid, v);
  const double norm = operator_v_norm(k.matrix, w);
  // sup_x Pv(x)/v(x) is attained at x = 0 with value 1/sqrt(1 - 2 eps)
  EXPECT_NEAR(norm, 1.0 / std::sqrt(0.8), 2e-3);
  EXPECT_NEAR(norm, 1.1180, 2e-3);
  const Vec pv = k.matrix * w;
  EXPECT_DOUBLE_EQ(norm, (pv.array() / w.array()).maxCoeff());
}

TEST(OperatorNorm, CenteredPowersDecrease) {
  const GridKernel k = discretize(ar1(0.5, 1.0), {-8.0, 8.0, 201, 1});
  const Vec w = weight_on(*k.grid, quadratic_weight(0.1));
  const Mat c = center_kernel(k).matrix;
  Mat power = c;
  double prev = operator_v_norm(power, w);
  for (int t = 2; t <= 10; ++t) {
    power = power * c;
    const double cur = operator_v_norm(power, w);
    EXPECT_LT(cur, prev) << "t=" << t;
    prev = cur;
  }
}

TEST(OperatorNorm, AxiomsAndSubmultiplicativity) {
  const Vec w = weight_on(*line(-2.0, 2.0, 20), quadratic_weight(0.3));
  const Mat a = random_matrix(20, 1), b = random_matrix(20, 2);
  const double na = operator_v_norm(a, w), nb = operator_v_norm(b, w);
  EXPECT_GE(na, 0.0);
  EXPECT_EQ(operator_v_norm(Mat::Zero(20, 20), w), 0.0);
  EXPECT_NEAR(operator_v_norm(-2.5 * a, w), 2.5 * na, 1e-12 * na);
  EXPECT_LE(operator_v_norm(a + b, w), na + nb + 1e-12);
  EXPECT_LE(operator_v_norm(a * b, w), na * nb * (1.0 + 1e-12));
  // the induced norm bounds the action on every function
  const Vec f = Vec::Random(20);
  EXPECT_LE(v_norm(a * f, w), na * v_norm(f, w) * (1.0 + 1e-12));
}

TEST(OperatorNorm, V1NormDominatesVNorm) {
  const GridKernel k = discretize(ar1(0.5, 1.0), {-8.0, 8.0, 201, 1});
  const Vec w = weight_on(*k.grid, quadratic_weight(0.1));
  EXPECT_GE(operator_v1_norm(*k.grid, k.matrix, w), operator_v_norm(k.matrix, w));
}

TEST(DecayRateFit, ExactGeometricSeries) {
  std::vector<std::pair<double, double>> s;
  for (int t = 0; t <= 10; ++t) s.emplace_back(t, 3.0 * std::pow(0.4, t));
  const DecayFit f = decay_rate_fit(s);
  EXPECT_NEAR(f.b0, 3.0, 1e-12);
  EXPECT_NEAR(f.rho0, 0.4, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
}

TEST(DecayRateFit, ConstantSeriesHasUnitRate) {
  const DecayFit f = decay_rate_fit({{0, 2.0}, {1, 2.0}, {2, 2.0}, {3, 2.0}});
  EXPECT_DOUBLE_EQ(f.rho0, 1.0);
  EXPECT_DOUBLE_EQ(f.b0, 2.0);
  EXPECT_EQ(f.r_squared, 1.0);
}

TEST(DecayRateFit, RejectsInvalidSeries) {
  EXPECT_THROW(decay_rate_fit({{0, 1.0}, {1, 0.0}, {2, 0.5}}), ContractViolation);
  EXPECT_THROW(decay_rate_fit({{0, 1.0}, {1, -1.0}, {2, 0.5}}), ContractViolation);
  EXPECT_THROW(decay_rate_fit({{0, 1.0}, {1, 0.5}}), ContractViolation);
  EXPECT_THROW(decay_rate_fit({{1, 1.0}, {1, 0.5}, {1, 0.2}}), ContractViolation);
}

TEST(DecayRateFit, CenteredAr1KernelDecaysAtRho) {
  const GridKernel k = discretize(ar1(0.5, 1.0), {-8.0, 8.0, 401, 1});
  const Vec w = weight_on(*k.grid, quadratic_weight(0.1));
  const Mat c = center_kernel(k).matrix;
  std::vector<std::pair<double, double>> s;
  Mat power = c;
  for (int t = 1; t <= 20; ++t) {
    s.emplace_back(t, operator_v_norm(power, w));
    power = power * c;
  }
  const DecayFit f = decay_rate_fit(s);
  EXPECT_NEAR(f.rho0, 0.5, 0.025);
  EXPECT_GT(f.r_squared, 0.99);
}

TEST(Weight, InvariantsAndScaling) {
  const WeightFunction v = quadratic_weight(0.1, 0.5);
  const Vec x = (Vec(2) << 1.0, -2.0).finished();
  EXPECT_GE(v(x), 1.0);
  EXPECT_DOUBLE_EQ(v(Vec::Zero(2)), 1.0);
  EXPECT_NEAR(v(x), std::exp(0.5 * 0.1 * 5.0), 1e-15);
  EXPECT_NEAR(v.log_value(x), 0.25, 1e-15);
  const Vec g = v.grad(x);
  EXPECT_NEAR(g(0), 0.5 * v(x) * 0.2 * 1.0, 1e-15);
  EXPECT_NEAR(g(1), 0.5 * v(x) * 0.2 * -2.0, 1e-15);
  EXPECT_DOUBLE_EQ(v.scaled(1.0)(x), quadratic_weight(0.1)(x));
  EXPECT_THROW(v.scaled(0.0), ContractViolation);
  EXPECT_THROW(v.scaled(1.5), ContractViolation);
  EXPECT_THROW(quadratic_weight(-0.1), ContractViolation);
  EXPECT_EQ(unit_weight()(x), 1.0);
}

TEST(Grid, DerivativeIsSecondOrder) {
  auto err = [](int points) {
    const GridPtr g = line(-2.0, 2.0, points);
    const GridFunction f = differentiate(sample(g, [](const Vec& x) { return std::sin(x(0)); }));
    double e = 0.0;
    for (int k = 0; k < g->size(); ++k) e = std::max(e, std::abs(f.derivs[0](k) - std::cos(g->node(k)(0))));
    return e;
  };
  const double coarse = err(41), fine = err(81);
  EXPECT_NEAR(coarse / fine, 4.0, 0.5);
}

TEST(Grid, TwoDimensionalLayoutAndWeights) {
  const Grid g({-1.0, 1.0, 5, 2});
  EXPECT_EQ(g.size(), 25);
  EXPECT_NEAR(g.quad_weights().sum(), 4.0, 1e-14);
  EXPECT_EQ(g.node(7)(0), -0.5);
  EXPECT_EQ(g.node(7)(1), 0.0);
  EXPECT_EQ(g.nearest(g.node(17)), 17);
  EXPECT_EQ(g.shifted(7, 0, 1), 12);
  EXPECT_EQ(g.shifted(7, 1, 1), 8);
  EXPECT_THROW(Grid({-1.0, 1.0, 2, 1}), ContractViolation);
  EXPECT_THROW(Grid({1.0, 1.0, 5, 1}), ContractViolation);
  EXPECT_THROW(Grid({-1.0, 1.0, 5, 3}), ContractViolation);
}
