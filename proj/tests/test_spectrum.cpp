#include <cmath>
#include <numbers>

#include <boost/math/special_functions/ellint_1.hpp>
#include <gtest/gtest.h>

#include "brl/spectrum.hpp"

using namespace brl;

constexpr double pi = std::numbers::pi;

TEST(BetaRational, CircleClosedForm) {
  const double R = 1.0 / (2 * pi);
  const EllipseDomain c = make_circle(R);
  for (auto [p, q] : {std::pair{1, 2}, {1, 3}, {2, 5}, {1, 11}})
    EXPECT_NEAR(beta_rational(c.boundary(), RotationNumber(p, q)), -2.0 * R * std::sin(pi * p / q), 1e-14);
}

TEST(Caustic, RotationNumberMatchesEllipticIntegralRatio) {
  const EllipseDomain e(2.0, 1.0);
  for (double lam : {0.05, 0.3, 0.6, 0.9, 0.99}) {
    const double k = std::sqrt(3.0 / (4.0 - lam * lam));
    const double ref = boost::math::ellint_1(k, std::asin(lam / 1.0)) / (2.0 * boost::math::ellint_1(k));
    EXPECT_NEAR(caustic_rotation_number(e, lam), ref, 1e-13) << lam;
    EXPECT_NEAR(caustic_modulus(e, lam), k, 1e-15);
  }
}

TEST(Caustic, AdvanceIndependentOfStartingPoint) {
  const EllipseDomain e(2.0, 1.0);
  const double lam = 0.4, w = caustic_rotation_number(e, lam);
  for (double phi0 : {0.0, 0.3, 1.2, 2.0, 4.4}) EXPECT_NEAR(caustic_theta_advance(e, lam, phi0), w, 1e-12);
}

TEST(Caustic, OmegaMonotoneAndInverse) {
  const EllipseDomain e(2.0, 1.0);
  double prev = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double w = caustic_rotation_number(e, i / 100.0);
    EXPECT_GT(w, prev);
    prev = w;
  }
  for (double w : {0.01, 0.1, 0.25, 0.4}) EXPECT_NEAR(caustic_rotation_number(e, lambda_of_omega(e, w)), w, 1e-13);
  // lambda crowds onto b as omega -> 1/2, so the round trip loses digits
  EXPECT_NEAR(caustic_rotation_number(e, lambda_of_omega(e, 0.46)), 0.46, 1e-5);
  EXPECT_NEAR(lambda_of_omega(e, -0.1), -lambda_of_omega(e, 0.1), 1e-15);
  EXPECT_THROW(lambda_of_omega(e, 0.5), DomainError);
  EXPECT_THROW(caustic_theta_advance(e, 1.0, 0.0), DomainError);
}

TEST(InvariantCurve, BetaAgreesWithPeriodicOrbits) {
  const EllipseDomain e(2.0, 1.0);
  for (auto [p, q] : {std::pair{1, 5}, {2, 9}, {1, 12}}) {
    const RotationNumber r(p, q);
    EXPECT_NEAR(beta_on_invariant_curve(e, r.value()), beta_rational(e.boundary(), r), 1e-10) << p << "/" << q;
  }
}

TEST(InvariantCurve, WrongConjugacyDetected) {
  const EllipseDomain e(2.0, 1.0);
  const double T = e.boundary().period();
  EXPECT_THROW(beta_on_invariant_curve(e.boundary(), [T](double th) { return T * th; }, 0.2), NonConjugacy);
}

TEST(Density, CircleIsConstant) {
  const EllipseDomain c = make_circle(1.0);
  const EllipseDensity dens(c, 256);
  for (double w : {0.05, 0.2, 0.4}) {
    const auto mu = dens(w);
    for (double v : mu) EXPECT_NEAR(v, 2.0 * std::sin(pi * w), 1e-12);
  }
  EXPECT_THROW(EllipseDensity(c, 256, true), DiskRejected);
}

TEST(Density, GridAgreesWithPointEvaluation) {
  const EllipseDomain e(2.0, 1.0);
  const EllipseDensity dens(e, 64);
  const auto mu = dens(0.15);
  for (int m : {0, 5, 17, 40}) EXPECT_NEAR(mu[m], kam_density_ellipse(e, 0.15, m / 64.0), 1e-12);
}

TEST(Density, PhiFormAgainstIndependentFormula) {
  const double a = 2.0, b = 1.0, w = 0.2;
  const EllipseDomain e(a, b);
  const double lam = lambda_of_omega(e, w);
  const double k = std::sqrt((a * a - b * b) / (a * a - lam * lam));
  for (double phi : {0.0, 0.7, 1.5}) {
    const double s = std::sin(phi), c = std::cos(phi);
    const double ref = lam / (2 * boost::math::ellint_1(k)) / std::sqrt((a * a * s * s + b * b * c * c) * (1 - k * k * c * c));
    EXPECT_NEAR(kam_density_ellipse_phi(e, w, phi), ref, 1e-13);
  }
}

TEST(Density, EvenAndHalfPeriodicInX) {
  const EllipseDomain e(2.0, 1.0);
  const EllipseDensity dens(e, 128);
  const auto mu = dens(0.1);
  for (int m = 1; m < 128; ++m) EXPECT_NEAR(mu[m], mu[128 - m], 1e-12);
  for (int m = 0; m < 64; ++m) EXPECT_NEAR(mu[m], mu[m + 64], 1e-12);
  const auto c = cosine_coefficients(mu, 16);
  for (int j = 1; j < 16; j += 2) EXPECT_NEAR(c[j], 0.0, 1e-12);
}

TEST(Derivatives, MatchFiniteDifferencesAndCrossChecks) {
  const EllipseDomain e(2.0, 1.0);
  const auto st = density_omega_derivatives(e, 0.1, 4, 256);
  const EllipseDensity dens(e, 256);
  const auto mu0 = dens(0.1);
  for (int m = 0; m < 256; m += 37) EXPECT_NEAR(st[0][m], mu0[m], 1e-13);
  const double h = 1e-4;
  const auto p = dens(0.1 + h), q = dens(0.1 - h);
  for (int m = 0; m < 256; m += 37) EXPECT_NEAR(st[1][m], (p[m] - q[m]) / (2 * h), 1e-6);
  ASSERT_EQ(st.cross_check.size(), 5u);
  for (double c : st.cross_check) EXPECT_LT(c, 1e-6);
  EXPECT_EQ(st.coefficients.size(), 5u);
}

TEST(Derivatives, RejectsOutOfRange) {
  const EllipseDomain e(2.0, 1.0);
  EXPECT_THROW(density_omega_derivatives(e, 0.6, 2, 64), DomainError);
  EXPECT_THROW(density_omega_derivatives(e, 0.1, -1, 64), DomainError);
}

TEST(Fourier, CosineCoefficientsExact) {
  const int M = 64;
  std::vector<double> f(M);
  for (int m = 0; m < M; ++m) f[m] = 0.5 + 2.0 * std::cos(2 * pi * 3 * m / M) - std::cos(2 * pi * 10 * m / M);
  const auto c = cosine_coefficients(f, 12);
  for (int j = 0; j < 12; ++j) EXPECT_NEAR(c[j], j == 0 ? 0.5 : j == 3 ? 2.0 : j == 10 ? -1.0 : 0.0, 1e-14);
  const auto h = half_periodic_profile(f, 12);
  EXPECT_NEAR(h.coeff(3), 0.0, 1e-15);
  EXPECT_NEAR(h.coeff(10), -1.0, 1e-14);
}

TEST(Moments, KnownValueAndInversion) {
  const auto m = sin_power_moments({0.0, 1.0}, 1);
  EXPECT_NEAR(m[0], 0.0, 1e-15);
  EXPECT_NEAR(m[1], -pi / 2, 1e-15);
  const std::vector<double> c = {0.4, -1.0, 0.25, 0.125, 0.0, 0.03};
  const auto back = coefficients_from_moments(sin_power_moments(c, 5));
  for (size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(back[k], c[k], 1e-12);
}

TEST(Moments, AgreeWithQuadrature) {
  const std::vector<double> c = {0.2, 0.5, -0.3};
  const auto mom = sin_power_moments(c, 4);
  for (int j = 0; j <= 4; ++j) {
    const int n = 512;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double phi = 2 * pi * i / n;
      s += (c[0] + c[1] * std::cos(2 * phi) + c[2] * std::cos(4 * phi)) * std::pow(std::sin(phi), 2 * j);
    }
    EXPECT_NEAR(mom[j], s * 2 * pi / n, 1e-12);
  }
}

TEST(NumericDensity, ReproducesEllipseDensity) {
  const EllipseDomain e(2.0, 1.0);
  NumericDensityOptions opt;
  opt.bounces = 1 << 15;
  opt.grid = 64;
  const double w = (std::sqrt(5.0) - 2.0) / 2.0;
  const auto nd = kam_density_numeric(e.boundary(), w, opt);
  EXPECT_NEAR(nd.omega, w, 1e-10);
  EXPECT_LT(nd.reconstruction_error, 1e-6);
  const EllipseDensity dens(e, 64);
  const auto ref = dens(w);
  for (int m = 0; m < 64; ++m) EXPECT_NEAR(nd.mu[m], ref[m], 1e-6 * sup_norm(ref));
}

TEST(NumericDensity, ResonantRotationNumberRejected) {
  NumericDensityOptions opt;
  opt.bounces = 1 << 15;
  opt.grid = 64;
  EXPECT_THROW(kam_density_numeric(EllipseDomain(2.0, 1.0).boundary(), 0.1, opt), NoInvariantCurve);
}

TEST(NumericDensity, RejectsRotationOutsideRange) {
  EXPECT_THROW(kam_density_numeric(EllipseDomain(2.0, 1.0).boundary(), 0.0), DomainError);
}
