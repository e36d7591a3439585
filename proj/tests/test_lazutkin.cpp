#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "brl/lazutkin.hpp"

using namespace brl;

constexpr double pi = std::numbers::pi;

TEST(CircleChart, ClosedForms) {
  const double R = 2.0;
  const LazutkinChart ch(make_circle(R).boundary());
  EXPECT_NEAR(ch.C(), std::pow(R, -1.0 / 3.0) / (2 * pi), 1e-14);
  for (double s : {0.0, 1.0, 5.0, 12.0}) {
    EXPECT_NEAR(ch.x_of_s(s), s / (2 * pi * R), 1e-13);
    EXPECT_NEAR(ch.m(ch.x_of_s(s)), pi, 1e-12);
    EXPECT_NEAR(lazutkin_y(ch, s, 0.8), 2.0 / pi * std::sin(0.4), 1e-13);
  }
}

TEST(EllipseChart, NormalisingConstantMatchesQuadrature) {
  const double a = 2.0, b = 1.0;
  const LazutkinChart ch(EllipseDomain(a, b).boundary());
  auto f = [&](double t) {
    const double s = std::sin(t), c = std::cos(t);
    const double w2 = a * a * s * s + b * b * c * c;
    const double k = a * b / std::pow(w2, 1.5);
    return std::cbrt(k * k) * std::sqrt(w2);
  };
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 2 * pi, 15, 1e-15);
  EXPECT_NEAR(ch.C(), 1.0 / I, 1e-13);
}

TEST(EllipseChart, CoordinateIsMonotoneUnitPeriodAndInvertible) {
  const LazutkinChart ch(EllipseDomain(3.0, 1.0).boundary());
  const double T = ch.domain().period();
  EXPECT_NEAR(ch.x_of_param(0.0), 0.0, 1e-15);
  EXPECT_NEAR(ch.x_of_param(T), 1.0, 1e-13);
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double t = T * i / 100;
    const double x = ch.x_of_param(t);
    EXPECT_GT(x, prev);
    prev = x;
    EXPECT_NEAR(ch.param_of_x(x), t, 1e-11);
    EXPECT_GT(ch.dx_dparam(t), 0.0);
  }
  for (double x : {0.1, 0.37, 0.9}) EXPECT_NEAR(ch.x_of_s(ch.s_of_x(x)), x, 1e-12);
}

TEST(EllipseChart, DensityIsDerivativeOfCoordinate) {
  const LazutkinChart ch(EllipseDomain(2.0, 1.0).boundary());
  const double h = 1e-5;
  for (double t : {0.2, 1.0, 2.9}) {
    EXPECT_NEAR(ch.dx_dparam(t), (ch.x_of_param(t + h) - ch.x_of_param(t - h)) / (2 * h), 1e-8);
  }
}

TEST(EllipseChart, MTimesDxDsIdentity) {
  // dx/ds = C kappa^{2/3} and m = kappa^{1/3} / (2C), so m^2 dx/ds = kappa^{4/3} / (4C)
  const LazutkinChart ch(EllipseDomain(2.0, 1.0).boundary());
  const auto& d = ch.domain();
  for (double s : {0.0, 1.5, 4.0}) {
    const double k = d.curvature(s), h = 1e-5;
    const double dxds = (ch.x_of_s(s + h) - ch.x_of_s(s - h)) / (2 * h);
    EXPECT_NEAR(dxds, ch.C() * std::cbrt(k * k), 1e-8);
    EXPECT_NEAR(ch.m(ch.x_of_s(s)), std::cbrt(k) / (2 * ch.C()), 1e-10);
    EXPECT_NEAR(ch.rho_of_x(ch.x_of_s(s)), 1.0 / k, 1e-10);
  }
}

TEST(NearIdentity, ResidualRatiosStayBoundedAsYShrinks) {
  const LazutkinChart ch(EllipseDomain(2.0, 1.0).boundary());
  const double P = ch.domain().perimeter();
  std::vector<double> rx, ry;
  for (double phi : {0.2, 0.05, 0.0125}) {
    std::vector<PhasePoint> pts;
    for (int i = 0; i < 16; ++i) pts.push_back({P * i / 16.0 + 0.01, phi});
    const auto r = near_identity_residual(ch, pts);
    rx.push_back(r.max_ratio_x);
    ry.push_back(r.max_ratio_y);
  }
  // |x1 - x - y| = O(y^3), |y1 - y| = O(y^4): the ratios settle instead of growing
  for (size_t i = 1; i < rx.size(); ++i) {
    EXPECT_LT(rx[i], 1.2 * rx[0]);
    EXPECT_LT(ry[i], 1.2 * ry[0]);
  }
  EXPECT_LT(rx.back(), 100.0);
  EXPECT_LT(ry.back(), 100.0);
}

TEST(NearIdentity, CircleIsExactTranslationInY) {
  const LazutkinChart ch(make_circle(1.0).boundary());
  const auto r = near_identity_residual(ch, {{0.0, 0.3}, {1.0, 0.1}});
  EXPECT_LT(r.max_dy, 1e-12);
}
