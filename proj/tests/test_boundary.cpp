#include <cmath>
#include <numbers>

#include <boost/math/special_functions/ellint_2.hpp>
#include <gtest/gtest.h>

#include "brl/boundary.hpp"

using namespace brl;

namespace {
double ellipse_perimeter(double a, double b) {
  const double e = std::sqrt(1.0 - (b / a) * (b / a));
  return 4.0 * a * boost::math::ellint_2(e);
}
}  // namespace

TEST(Circle, PerimeterAndCurvature) {
  const EllipseDomain c = make_circle(0.5);
  EXPECT_TRUE(c.is_disk());
  EXPECT_NEAR(c.boundary().perimeter(), std::numbers::pi, 1e-14);
  for (double s : {0.0, 0.3, 1.7, 3.0}) EXPECT_NEAR(c.boundary().curvature(s), 2.0, 1e-12);
}

TEST(Ellipse, PerimeterMatchesCompleteIntegral) {
  for (auto [a, b] : {std::pair{2.0, 1.0}, {1.0, 1.0}, {5.0, 0.5}, {1.3, 1.2}}) {
    const EllipseDomain e(a, b);
    EXPECT_NEAR(e.boundary().perimeter(), ellipse_perimeter(a, b), 1e-12 * a) << a << " " << b;
  }
}

TEST(Ellipse, VertexCurvatures) {
  const EllipseDomain e(2.0, 1.0);
  const auto& d = e.boundary();
  const double P = d.perimeter();
  EXPECT_NEAR(d.curvature(0.0), 2.0, 1e-10);          // a / b^2
  EXPECT_NEAR(d.curvature(0.25 * P), 0.25, 1e-10);    // b / a^2
  EXPECT_NEAR(d.radius_of_curvature(0.5 * P), 0.5, 1e-10);
}

TEST(Ellipse, ArcLengthIsUnitSpeed) {
  const EllipseDomain e(2.0, 1.0);
  const auto& d = e.boundary();
  const double P = d.perimeter(), h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const double s = P * i / 20.0 + 0.01;
    EXPECT_NEAR((d.position(s + h) - d.position(s - h)).norm() / (2 * h), 1.0, 1e-8);
  }
}

TEST(Ellipse, ParamRoundTripAndQuarterArc) {
  const EllipseDomain e(3.0, 1.0);
  const auto& d = e.boundary();
  for (double t : {0.0, 0.4, 2.0, 5.5}) EXPECT_NEAR(d.param_of_s(d.s_of_param(t)), t, 1e-12);
  EXPECT_NEAR(arclength_of_param(e, std::numbers::pi / 2), 0.25 * d.perimeter(), 1e-12);
}

TEST(Ellipse, FrameIsOrthonormalAndOutward) {
  const EllipseDomain e(2.0, 1.0);
  const auto& d = e.boundary();
  for (double s : {0.1, 1.0, 3.3, 8.0}) {
    const Vec2 T = d.tangent(s), N = d.outward_normal(s);
    EXPECT_NEAR(T.norm(), 1.0, 1e-14);
    EXPECT_NEAR(T.dot(N), 0.0, 1e-14);
    EXPECT_GT(N.dot(d.position(s)), 0.0);
    EXPECT_GT(cross(T, N), -1.0 - 1e-14);
  }
}

TEST(Ellipse, RejectsInvalidAxes) {
  EXPECT_THROW(EllipseDomain(1.0, 2.0), InvalidDomain);
  EXPECT_THROW(EllipseDomain(1.0, 0.0), InvalidDomain);
  EXPECT_THROW(EllipseDomain(1.0, -1.0), InvalidDomain);
}

TEST(Dihedral, EllipseHasBothSymmetries) {
  const auto f = check_dihedral(EllipseDomain(2.0, 1.0).boundary());
  EXPECT_TRUE(f.axis);
  EXPECT_TRUE(f.central);
}

TEST(Dihedral, OddModeBreaksCentralSymmetry) {
  const PerturbedEllipseDomain p(EllipseDomain(2.0, 1.0), 0.01, EvenProfile({0.0, 1.0}, false));
  const auto f = check_dihedral(p.boundary());
  EXPECT_TRUE(f.axis);
  EXPECT_FALSE(f.central);
}

TEST(Dihedral, HalfPeriodicProfileKeepsBoth) {
  const PerturbedEllipseDomain p(EllipseDomain(2.0, 1.0), 0.01, EvenProfile::from_half_coeffs({0.0, 1.0, 0.3}));
  const auto f = check_dihedral(p.boundary());
  EXPECT_TRUE(f.axis);
  EXPECT_TRUE(f.central);
}

TEST(Perturbed, ZeroEpsilonReproducesEllipse) {
  const EllipseDomain e(2.0, 1.0);
  const PerturbedEllipseDomain p(e, 0.0, EvenProfile::from_half_coeffs({0.0, 1.0}));
  EXPECT_NEAR(p.boundary().perimeter(), e.boundary().perimeter(), 1e-12);
  for (double s : {0.0, 0.7, 2.5, 6.0})
    EXPECT_NEAR((p.boundary().position(s) - e.boundary().position(s)).norm(), 0.0, 1e-10);
}

TEST(Perturbed, LargeEpsilonLosesConvexity) {
  EXPECT_THROW(PerturbedEllipseDomain(EllipseDomain(2.0, 1.0), 5.0, EvenProfile::from_half_coeffs({0.0, 0.0, 0.0, 1.0})),
               InvalidDomain);
}

TEST(Normalize, UnitPerimeterAndScale) {
  const EllipseDomain e(2.0, 1.0);
  const auto n = normalize_perimeter(e.boundary());
  EXPECT_NEAR(n.domain.perimeter(), 1.0, 1e-13);
  EXPECT_NEAR(n.scale, 1.0 / e.boundary().perimeter(), 1e-15);
  EXPECT_NEAR(n.domain.curvature(0.0), 2.0 / n.scale, 1e-8);
  const auto again = normalize_perimeter(n.domain);
  EXPECT_NEAR(again.scale, 1.0, 1e-14);
}

TEST(Transform, RigidMotionPreservesInvariants) {
  const EllipseDomain e(2.0, 1.0);
  const auto moved = e.boundary().transformed(1.0, 0.7, Vec2(3.0, -1.0));
  EXPECT_NEAR(moved.perimeter(), e.boundary().perimeter(), 1e-12);
  for (double s : {0.0, 1.0, 4.0}) EXPECT_NEAR(moved.curvature(s), e.boundary().curvature(s), 1e-9);
}
