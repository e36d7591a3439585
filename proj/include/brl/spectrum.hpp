#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "brl/dynamics.hpp"
#include "brl/lazutkin.hpp"
#include "brl/orbits.hpp"
#include "brl/parallel.hpp"
#include "brl/profile.hpp"
#include "brl/specfun.hpp"
#include "brl/taylor.hpp"

namespace brl {

// ---------------------------------------------------------------------------
// beta from periodic orbits

inline double beta_rational(const LazutkinChart& chart, RotationNumber rot) {
  return -max_perimeter_orbit(chart, rot).perimeter_of_orbit / rot.q;
}

inline double beta_rational(const BoundaryDomain& d, RotationNumber rot) {
  return beta_rational(LazutkinChart(d), rot);
}

// ---------------------------------------------------------------------------
// Ellipse caustics. With gamma(phi) = (a cos phi, b sin phi) the motion on the
// caustic C_lambda is a rotation in theta(phi) = F(phi - pi/2, k) / (4K).

struct CausticRecord {
  double lambda = 0.0;
  double k = 0.0;      // sqrt((a^2 - b^2) / (a^2 - lambda^2))
  double omega = 0.0;
};

inline double caustic_modulus(const EllipseDomain& e, double lambda) {
  const double a = e.a(), b = e.b();
  return std::sqrt((a * a - b * b) / (a * a - lambda * lambda));
}

inline double ellipse_theta(double phi, double k) {
  return elliptic_F(phi - 0.5 * std::numbers::pi, k) / (4.0 * elliptic_K(k));
}

// Lifted inverse of ellipse_theta.
inline double ellipse_phi_of_theta(double theta, double k) {
  return 0.5 * std::numbers::pi + elliptic_F_inverse(4.0 * elliptic_K(k) * theta, k);
}

// Theta advance of one bounce from gamma(phi0) along the chord tangent to
// C_lambda in the positive direction.
inline double caustic_theta_advance(const EllipseDomain& e, double lambda, double phi0) {
  const double a = e.a(), b = e.b();
  if (!(lambda >= 0.0 && lambda < b)) throw DomainError("caustic parameter must satisfy 0 <= lambda < b");
  if (lambda == 0.0) return 0.0;
  const double s = std::sin(phi0), c = std::cos(phi0);
  const double w = std::hypot(a * s, b * c);
  const double sphi = lambda / w;
  const double cphi = std::sqrt((1.0 - sphi) * (1.0 + sphi));
  const Vec2 p(a * c, b * s), T(-a * s / w, b * c / w);
  const Vec2 v = cphi * T + sphi * inward_normal(T);
  const double J = p.x() * v.x() / (a * a) + p.y() * v.y() / (b * b);
  const double t = -2.0 * J / (v.x() * v.x() / (a * a) + v.y() * v.y() / (b * b));
  const Vec2 p1 = p + t * v;
  double phi1 = std::atan2(p1.y() / b, p1.x() / a);
  while (phi1 <= phi0) phi1 += 2.0 * std::numbers::pi;
  while (phi1 > phi0 + 2.0 * std::numbers::pi) phi1 -= 2.0 * std::numbers::pi;
  const double k = caustic_modulus(e, lambda);
  return ellipse_theta(phi1, k) - ellipse_theta(phi0, k);
}

inline double caustic_rotation_number(const EllipseDomain& e, double lambda) {
  return caustic_theta_advance(e, lambda, 0.5 * std::numbers::pi);
}

inline CausticRecord caustic_record(const EllipseDomain& e, double lambda) {
  return {lambda, caustic_modulus(e, lambda), caustic_rotation_number(e, lambda)};
}

// Inverse of lambda -> omega by bisection; odd extension for omega < 0.
inline double lambda_of_omega(const EllipseDomain& e, double omega) {
  if (omega < 0.0) return -lambda_of_omega(e, -omega);
  if (!(omega < 0.5)) throw DomainError("rotation number must lie in [0, 1/2)");
  if (omega == 0.0) return 0.0;
  double lo = 0.0, hi = e.b();
  for (int i = 0; i < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (caustic_rotation_number(e, mid) < omega ? lo : hi) = mid;
  }
  if (!(hi < e.b())) throw ConvergenceFailure("lambda_of_omega: bracket collapsed onto lambda = b");
  return 0.5 * (lo + hi);
}

// Explicit conjugacy theta -> native parameter on the caustic of rotation omega.
inline std::function<double(double)> ellipse_conjugacy(const EllipseDomain& e, double omega) {
  const double k = caustic_modulus(e, lambda_of_omega(e, omega));
  return [k](double theta) { return ellipse_phi_of_theta(theta, k); };
}

// beta(omega) = -int_0^1 |gamma(t(theta + omega)) - gamma(t(theta))| dtheta,
// with spot checks of the reflection law along the supplied conjugacy.
inline double beta_on_invariant_curve(const BoundaryDomain& d, const std::function<double(double)>& t_of_theta,
                                      double omega, int nodes = 2048, double check_tol = 1e-6) {
  if (omega == 0.0) return 0.0;
  for (int i = 0; i < 16; ++i) {
    const double th = (i + 0.5) / 16.0;
    const CurveJet j0 = d.jet(t_of_theta(th)), j1 = d.jet(t_of_theta(th + omega)), j2 = d.jet(t_of_theta(th + 2 * omega));
    const Vec2 u1 = (j1.p - j0.p).normalized(), u2 = (j2.p - j1.p).normalized();
    const Vec2 T = j1.tangent();
    if (std::abs(u1.dot(T) - u2.dot(T)) > check_tol)
      throw NonConjugacy("supplied conjugacy does not satisfy the reflection law");
  }
  double s = 0.0;
  for (int m = 0; m < nodes; ++m) {
    const double th = static_cast<double>(m) / nodes;
    s += (d.jet(t_of_theta(th + omega)).p - d.jet(t_of_theta(th)).p).norm();
  }
  return -s / nodes;
}

inline double beta_on_invariant_curve(const EllipseDomain& e, double omega, int nodes = 2048) {
  return beta_on_invariant_curve(e.boundary(), ellipse_conjugacy(e, omega), omega, nodes);
}

// ---------------------------------------------------------------------------
// KAM density of the ellipse

// mu~(omega, phi) = lambda / (2K) [ (a^2 sin^2 + b^2 cos^2)(1 - k^2 cos^2) ]^{-1/2}
inline double kam_density_ellipse_phi(const EllipseDomain& e, double omega, double phi) {
  if (omega == 0.0) return 0.0;
  const double lam = lambda_of_omega(e, omega);
  const double k = caustic_modulus(e, std::abs(lam));
  const double s = std::sin(phi), c = std::cos(phi);
  const double g = (e.a() * e.a() * s * s + e.b() * e.b() * c * c) * (1.0 - k * k * c * c);
  return lam / (2.0 * elliptic_K(k) * std::sqrt(g));
}

// Series in e = omega - omega0 of P = lambda / (2K) and m = k^2, obtained by
// reverting omega(lambda) = F(asin(lambda / b), k) / (2K).
struct CausticSeries {
  Taylor prefactor, modulus_sq;
};

inline CausticSeries caustic_series(const EllipseDomain& e, double omega0, int order) {
  const double a = e.a(), b = e.b();
  const double lam0 = lambda_of_omega(e, omega0);
  const Taylor L = Taylor::variable(order, lam0);
  const Taylor m = (a * a - b * b) / (a * a - L * L);
  const Taylor K = elliptic_K_of_m(m);
  const Taylor W = elliptic_F_of_m(asin(L / b), m) / (2.0 * K);
  const Taylor dl = revert(W);
  return {compose(L / (2.0 * K), dl), compose(m, dl)};
}

// Evaluates mu(omega, x) = mu~(omega, phi(x)) phi'(x) on a fixed x-grid.
class EllipseDensity {
 public:
  EllipseDensity(const EllipseDomain& e, int grid = 4096, bool totality = false) : e_(e), M_(grid) {
    if (totality && e.is_disk())
      throw DiskRejected("density totality requires an ellipse which is not a disk");
    const LazutkinChart chart(e.boundary());
    phi_.resize(M_);
    dphi_.resize(M_);
    for (int m = 0; m < M_; ++m) {
      phi_[m] = chart.param_of_x(static_cast<double>(m) / M_);
      dphi_[m] = 1.0 / chart.dx_dparam(phi_[m]);
    }
  }

  int grid() const { return M_; }
  const EllipseDomain& ellipse() const { return e_; }

  std::vector<double> operator()(double omega) const {
    std::vector<double> mu(M_, 0.0);
    if (omega == 0.0) return mu;
    const double lam = lambda_of_omega(e_, omega);
    const double k = caustic_modulus(e_, std::abs(lam));
    const double pre = lam / (2.0 * elliptic_K(k));
    const double a2 = e_.a() * e_.a(), b2 = e_.b() * e_.b();
    for (int m = 0; m < M_; ++m) {
      const double s = std::sin(phi_[m]), c = std::cos(phi_[m]);
      mu[m] = pre / std::sqrt((a2 * s * s + b2 * c * c) * (1.0 - k * k * c * c)) * dphi_[m];
    }
    return mu;
  }

  // d^j mu / d omega^j (omega0, x_m) for j <= jmax, by Taylor-mode differentiation.
  std::vector<std::vector<double>> derivatives(double omega0, int jmax) const {
    const CausticSeries cs = caustic_series(e_, omega0, jmax);
    std::vector<std::vector<double>> out(jmax + 1, std::vector<double>(M_));
    const double a2 = e_.a() * e_.a(), b2 = e_.b() * e_.b();
    parallel_for(M_, [&](int m) {
      const double s = std::sin(phi_[m]), c = std::cos(phi_[m]);
      const double A = dphi_[m] / std::sqrt(a2 * s * s + b2 * c * c);
      const Taylor mu = cs.prefactor * pow(1.0 - cs.modulus_sq * (c * c), -0.5) * A;
      for (int j = 0; j <= jmax; ++j) out[j][m] = mu.derivative(j);
    });
    return out;
  }

 private:
  EllipseDomain e_;
  int M_;
  std::vector<double> phi_, dphi_;
};

inline double kam_density_ellipse(const EllipseDomain& e, double omega, double x) {
  const LazutkinChart chart(e.boundary());
  const double phi = chart.param_of_x(x);
  return kam_density_ellipse_phi(e, omega, phi) / chart.dx_dparam(phi);
}

// ---------------------------------------------------------------------------
// Fourier helpers on the uniform grid x_m = m / M

// Cosine coefficients c_j (j < modes) of an even grid function.
inline std::vector<double> cosine_coefficients(const std::vector<double>& f, int modes) {
  const int M = static_cast<int>(f.size());
  std::vector<double> c(modes, 0.0);
  std::vector<double> cs(M);
  for (int m = 0; m < M; ++m) cs[m] = std::cos(2.0 * std::numbers::pi * m / M);
  for (int j = 0; j < modes && j <= M / 2; ++j) {
    double s = 0.0;
    for (int m = 0; m < M; ++m) {
      const int idx = static_cast<int>((static_cast<long long>(j) * m) % M);
      s += f[m] * cs[idx];
    }
    c[j] = (j == 0 || 2 * j == M ? 1.0 : 2.0) * s / M;
  }
  return c;
}

// Keeps the even-indexed cosine modes, which is the half-periodic part.
inline EvenProfile half_periodic_profile(const std::vector<double>& f, int modes, double alpha = 3.5) {
  std::vector<double> c = cosine_coefficients(f, modes);
  for (std::size_t j = 1; j < c.size(); j += 2) c[j] = 0.0;
  return EvenProfile(std::move(c), true, alpha);
}

// ---------------------------------------------------------------------------
// omega-derivatives by Chebyshev differentiation

namespace detail {

// d^j/du^j at u = 0 of sum_k c_k T_k(u), j = 0..jmax.
inline std::vector<double> chebyshev_series_derivatives_at_zero(std::vector<double> c, int jmax) {
  std::vector<double> out(jmax + 1, 0.0);
  for (int j = 0; j <= jmax; ++j) {
    double v = 0.0;
    for (int k = 0; k < static_cast<int>(c.size()); ++k) {
      const int r = k % 4;  // T_k(0) = cos(k pi / 2)
      v += c[k] * (r == 0 ? 1.0 : r == 2 ? -1.0 : 0.0);
    }
    out[j] = v;
    const int d = static_cast<int>(c.size());
    std::vector<double> dc(std::max(1, d - 1), 0.0);
    for (int k = d - 1; k >= 1; --k) {
      const double next = k + 1 <= d - 2 ? dc[k + 1] : 0.0;
      dc[k - 1] = next + 2.0 * k * c[k];
    }
    if (!dc.empty()) dc[0] *= 0.5;
    c = std::move(dc);
  }
  return out;
}

// Weights w_i with f^{(j)}(0) ~ sum_i w_i f(u_i) at the Chebyshev-Gauss nodes
// u_i = cos(pi (i + 1/2) / n) on [-1, 1].
inline std::vector<std::vector<double>> chebyshev_derivative_weights(int n, int jmax) {
  std::vector<std::vector<double>> W(jmax + 1, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    // coefficients of the interpolant of the i-th unit vector
    std::vector<double> c(n);
    for (int k = 0; k < n; ++k) c[k] = (k == 0 ? 1.0 : 2.0) / n * std::cos(k * std::numbers::pi * (i + 0.5) / n);
    const auto d = chebyshev_series_derivatives_at_zero(std::move(c), jmax);
    for (int j = 0; j <= jmax; ++j) W[j][i] = d[j];
  }
  return W;
}

// Same for arbitrary distinct nodes u_i.
inline std::vector<std::vector<double>> interpolation_derivative_weights(const std::vector<double>& u, int jmax) {
  const int n = static_cast<int>(u.size());
  double r = 0.0;
  for (double v : u) r = std::max(r, std::abs(v));
  Eigen::MatrixXd V(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) V(i, k) = std::cos(k * std::acos(std::clamp(u[i] / r, -1.0, 1.0)));
  const Eigen::MatrixXd Vi = V.fullPivLu().inverse();
  std::vector<std::vector<double>> W(jmax + 1, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    std::vector<double> c(n);
    for (int k = 0; k < n; ++k) c[k] = Vi(k, i);
    const auto d = chebyshev_series_derivatives_at_zero(std::move(c), jmax);
    for (int j = 0; j <= jmax; ++j) W[j][i] = d[j] * std::pow(r, -j);
  }
  return W;
}

}  // namespace detail

struct DensityStack {
  double omega0 = 0.0;
  int jmax = 0;
  double h = 0.02;
  int nodes = 0;
  int grid = 0;
  std::vector<std::vector<double>> values;  // values[j][m] = d^j mu / d omega^j at x_m
  std::vector<EvenProfile> coefficients;    // half-periodic cosine coefficients
  std::vector<double> cross_check;          // relative disagreement per j
  const std::vector<double>& operator[](int j) const { return values.at(j); }
};

// Chebyshev fit of omega -> mu(omega, .) on [omega0 - h, omega0 + h].
inline std::vector<std::vector<double>> chebyshev_stack(const std::function<std::vector<double>(double)>& mu,
                                                       double omega0, int jmax, int nodes, double h) {
  const auto W = detail::chebyshev_derivative_weights(nodes, jmax);
  std::vector<std::vector<double>> samples(nodes);
  parallel_for(nodes, [&](int i) { samples[i] = mu(omega0 + h * std::cos(std::numbers::pi * (i + 0.5) / nodes)); });
  const int M = static_cast<int>(samples[0].size());
  std::vector<std::vector<double>> out(jmax + 1, std::vector<double>(M, 0.0));
  for (int j = 0; j <= jmax; ++j) {
    const double scale = std::pow(h, -j);
    for (int i = 0; i < nodes; ++i) {
      const double w = W[j][i] * scale;
      for (int m = 0; m < M; ++m) out[j][m] += w * samples[i][m];
    }
  }
  return out;
}

// Richardson-extrapolated central differences for j = 1, 2, 3.
inline std::vector<double> richardson_derivative(const std::function<std::vector<double>(double)>& mu, double omega0,
                                                 int j, double h) {
  auto D = [&](double hh) {
    std::vector<double> r;
    auto f = [&](double s) { return mu(omega0 + s * hh); };
    if (j == 1) {
      const auto p = f(1), m = f(-1);
      r.resize(p.size());
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = (p[i] - m[i]) / (2 * hh);
    } else if (j == 2) {
      const auto p = f(1), z = f(0), m = f(-1);
      r.resize(p.size());
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = (p[i] - 2 * z[i] + m[i]) / (hh * hh);
    } else {
      const auto p2 = f(2), p1 = f(1), m1 = f(-1), m2 = f(-2);
      r.resize(p1.size());
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = (p2[i] - 2 * p1[i] + 2 * m1[i] - m2[i]) / (2 * hh * hh * hh);
    }
    return r;
  };
  const auto a = D(h), b = D(0.5 * h);
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (4.0 * b[i] - a[i]) / 3.0;
  return r;
}

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Stack of d^j mu(omega0, .) for j <= jmax, cross-validated by a second
// Chebyshev fit on a narrower stencil and, for j <= 3, by finite differences.
// Polynomial interpolation of samples f_i at omega0 + h u_i, differentiated at omega0.
inline std::vector<std::vector<double>> interpolate_stack(const std::vector<double>& u,
                                                         const std::vector<std::vector<double>>& f, int jmax,
                                                         double h) {
  const auto W = detail::interpolation_derivative_weights(u, jmax);
  const int M = static_cast<int>(f[0].size());
  std::vector<std::vector<double>> out(jmax + 1, std::vector<double>(M, 0.0));
  for (int j = 0; j <= jmax; ++j) {
    const double scale = std::pow(h, -j);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double w = W[j][i] * scale;
      for (int m = 0; m < M; ++m) out[j][m] += w * f[i][m];
    }
  }
  return out;
}

// Generic stack for a smooth omega -> mu(omega, .): Chebyshev fits at h and 0.75 h.
inline DensityStack density_stack(const std::function<std::vector<double>(double)>& mu, double omega0, int jmax,
                                  double h = 0.02, double tol = 1e-6, int coeff_modes = 513) {
  if (jmax < 0) throw DomainError("jmax must be non-negative");
  DensityStack st;
  st.omega0 = omega0;
  st.jmax = jmax;
  st.h = h;
  st.nodes = 2 * jmax + 8;
  st.values = chebyshev_stack(mu, omega0, jmax, st.nodes, h);
  st.grid = static_cast<int>(st.values[0].size());
  const auto alt = chebyshev_stack(mu, omega0, jmax, st.nodes, 0.75 * h);
  for (int j = 0; j <= jmax; ++j) {
    const double scale = std::max(sup_norm(st.values[j]), 1e-300);
    const double dis = sup_distance(st.values[j], alt[j]) / scale;
    st.cross_check.push_back(dis);
    if (sup_norm(st.values[j]) > 0.0 && dis > tol)
      throw DifferentiationUnstable("omega-derivative " + std::to_string(j) + " fails the cross-check");
  }
  for (int j = 0; j <= jmax; ++j) st.coefficients.push_back(half_periodic_profile(st.values[j], coeff_modes));
  return st;
}

// Ellipse stack by Taylor-mode differentiation. Cross-checks: Chebyshev fit
// and Richardson differences for j <= 3, and agreement of the (order >= 16)
// series with direct evaluation at omega0 +- 0.01.
inline DensityStack density_omega_derivatives(const EllipseDomain& e, double omega0, int jmax, int grid = 4096,
                                              double tol = 1e-6, bool totality = false) {
  if (!(omega0 >= 0.0 && omega0 < 0.5)) throw DomainError("omega0 must lie in [0, 1/2)");
  if (jmax < 0) throw DomainError("jmax must be non-negative");
  const EllipseDensity dens(e, grid, totality);
  auto mu = [&](double w) { return dens(w); };
  DensityStack st;
  st.omega0 = omega0;
  st.jmax = jmax;
  st.grid = grid;
  const int order = std::max(jmax, 16);
  auto all = dens.derivatives(omega0, order);
  const int jc = std::min(jmax, 3);
  st.nodes = 2 * jc + 8;
  const auto cheb = chebyshev_stack(mu, omega0, jc, st.nodes, st.h);
  double consistency = 0.0;
  for (double d : {-0.01, 0.01}) {
    if (omega0 + d < 0.0) continue;
    const auto direct = mu(omega0 + d);
    std::vector<double> sum(grid, 0.0);
    double pw = 1.0;
    for (int j = 0; j <= order; ++j) {
      for (int m = 0; m < grid; ++m) sum[m] += all[j][m] * pw;
      pw *= d / (j + 1);
    }
    consistency = std::max(consistency, sup_distance(sum, direct) / std::max(sup_norm(direct), 1e-300));
  }
  for (int j = 0; j <= jmax; ++j) {
    const double scale = sup_norm(all[j]);
    double dis = consistency;
    if (j <= jc && scale > 0.0) {
      dis = std::max(dis, sup_distance(all[j], cheb[j]) / scale);
      if (j >= 1) {
        const double hj = j == 1 ? 1e-3 : 2e-3;
        dis = std::max(dis, sup_distance(all[j], richardson_derivative(mu, omega0, j, hj)) / scale);
      }
    }
    st.cross_check.push_back(dis);
    if (dis > tol) throw DifferentiationUnstable("omega-derivative " + std::to_string(j) + " fails the cross-check");
  }
  all.resize(jmax + 1);
  st.values = std::move(all);
  for (int j = 0; j <= jmax; ++j) st.coefficients.push_back(half_periodic_profile(st.values[j], 513));
  return st;
}

// ---------------------------------------------------------------------------
// Moments of even, half-periodic profiles in phi

// N(phi) = sum_k coeffs[k] cos(2 k phi); returns int_0^{2pi} N sin^{2j} phi dphi.
inline std::vector<double> sin_power_moments(const std::vector<double>& coeffs, int jmax) {
  std::vector<double> m(jmax + 1, 0.0);
  for (int j = 0; j <= jmax; ++j) {
    const auto s = sin_power_coeffs(j);
    double v = 0.0;
    for (int k = 0; k <= j && k < static_cast<int>(coeffs.size()); ++k)
      v += (k == 0 ? 2.0 : 1.0) * std::numbers::pi * coeffs[k] * s[k];
    m[j] = v;
  }
  return m;
}

// Back substitution through the lower-triangular moment map.
inline std::vector<double> coefficients_from_moments(const std::vector<double>& moments) {
  const int n = static_cast<int>(moments.size());
  std::vector<double> c(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const auto s = sin_power_coeffs(j);
    double r = moments[j];
    for (int k = 0; k < j; ++k) r -= (k == 0 ? 2.0 : 1.0) * std::numbers::pi * c[k] * s[k];
    c[j] = r / ((j == 0 ? 2.0 : 1.0) * std::numbers::pi * s[j]);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Numerical invariant curves

struct NumericDensityOptions {
  int bounces = 1 << 17;
  int secant_bounces = 1 << 13;
  int fourier_modes = 96;
  int grid = 4096;
  double rotation_tol = 1e-9;
  double reconstruction_tol = 1e-6;  // series vs orbit samples, in units of the period
};

struct NumericDensity {
  double omega = 0.0;           // measured rotation number of the reconstructed curve
  double phi0 = 0.0;            // angle at t = 0
  double rotation_spread = 0.0; // |half-orbit estimate - full estimate|
  double coefficient_spread = 0.0;  // same for the Fourier data of the curve
  double reconstruction_error = 0.0;  // series evaluated along the orbit vs the orbit
  std::vector<double> x, mu;
};

namespace detail {

struct ConjugacyFit {
  std::vector<std::complex<double>> u_hat, phi_hat;  // n = 0..K
  double omega = 0.0, spread = 0.0;
};

inline double rotation_from_steps(const std::vector<StepResult>& steps, int n, double period) {
  const auto w = birkhoff_weights(n);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += w[k] * steps[k].advance;
  return acc / period;
}

}  // namespace detail

// Reconstructs t(theta) and phi(theta) on the invariant curve of rotation
// omega through t = 0 from weighted Birkhoff averages of one long orbit, then
// mu(x) = 2 sin phi(theta(x)) theta'(x).
inline NumericDensity kam_density_numeric(const LazutkinChart& chart, double omega,
                                          const NumericDensityOptions& opt = {}) {
  const BoundaryDomain& d = chart.domain();
  const double T = d.period();
  if (!(omega > 0.0 && omega < 0.5)) throw DomainError("rotation number must lie in (0, 1/2)");

  auto rot = [&](double phi0) { return rotation_number_estimate(d, {0.0, phi0}, opt.secant_bounces) - omega; };
  double p0 = std::numbers::pi * omega, p1 = p0 * 1.01;
  double f0 = rot(p0), f1 = rot(p1);
  bool converged = false;
  for (int it = 0; it < 60; ++it) {
    if (f1 == f0) break;
    double p2 = p1 - f1 * (p1 - p0) / (f1 - f0);
    p2 = std::clamp(p2, 1e-6, std::numbers::pi - 1e-6);
    p0 = p1;
    f0 = f1;
    p1 = p2;
    f1 = rot(p1);
    if (std::abs(f1) < 1e-14 || std::abs(p1 - p0) < 1e-15) {
      converged = true;
      break;
    }
  }
  if (!converged && !(std::abs(f1) < 1e-11)) throw NoInvariantCurve("no orbit of the requested rotation number found");

  const int N = opt.bounces, K = opt.fourier_modes;
  const auto steps = billiard_orbit_param(d, {0.0, p1}, N);
  const double w_full = detail::rotation_from_steps(steps, N, T);
  const double w_half = detail::rotation_from_steps(steps, N / 2, T);
  NumericDensity out;
  out.omega = w_full;
  out.phi0 = p1;
  out.rotation_spread = std::abs(w_full - w_half);
  if (!(out.rotation_spread < opt.rotation_tol))
    throw NoInvariantCurve("rotation-number estimate does not converge along the orbit");

  // weighted Fourier coefficients of u(theta) = t(theta) - T theta and phi(theta)
  const auto w = birkhoff_weights(N), wh = birkhoff_weights(N / 2);
  std::vector<std::complex<double>> uh(K + 1), ph(K + 1), uh2(K + 1), ph2(K + 1);
  double u = 0.0, phi = p1;
  const std::complex<double> rotstep = std::polar(1.0, -2.0 * std::numbers::pi * w_full);
  std::complex<double> z(1.0, 0.0);  // exp(-2 pi i k omega)
  for (int k = 0; k < N; ++k) {
    std::complex<double> zn(1.0, 0.0);
    const double wk2 = k < N / 2 ? wh[k] : 0.0;
    for (int n = 0; n <= K; ++n) {
      uh[n] += w[k] * u * zn;
      ph[n] += w[k] * phi * zn;
      if (wk2 != 0.0) {
        uh2[n] += wk2 * u * zn;
        ph2[n] += wk2 * phi * zn;
      }
      zn *= z;
    }
    u += steps[k].advance - T * w_full;
    phi = steps[k].next.phi;
    z *= rotstep;
    if ((k & 1023) == 1023) z /= std::abs(z);
  }
  // bounds the change of phi and of theta' between the half and the full orbit
  for (int n = 0; n <= K; ++n)
    out.coefficient_spread += 2.0 * (std::abs(ph[n] - ph2[n]) + 2.0 * std::numbers::pi * n / T * std::abs(uh[n] - uh2[n]));
  auto series = [&](const std::vector<std::complex<double>>& c, double th, double* deriv) {
    double v = c[0].real(), dv = 0.0;
    for (int n = 1; n <= K; ++n) {
      const std::complex<double> e = std::polar(1.0, 2.0 * std::numbers::pi * n * th);
      v += 2.0 * (c[n] * e).real();
      dv += 2.0 * (c[n] * e * std::complex<double>(0.0, 2.0 * std::numbers::pi * n)).real();
    }
    if (deriv) *deriv = dv;
    return v;
  };

  // a resonant orbit is periodic and does not fill the curve; the series then misses it
  {
    double uk = 0.0;
    const int stride = std::max(1, N / 97);
    for (int k = 0; k < N; ++k) {
      if (k % stride == 0) {
        const double th = k * w_full;
        const double phik = k == 0 ? p1 : steps[k - 1].next.phi;
        out.reconstruction_error = std::max(
            {out.reconstruction_error, std::abs(series(uh, th, nullptr) - uk) / T, std::abs(series(ph, th, nullptr) - phik)});
      }
      uk += steps[k].advance - T * w_full;
    }
  }
  if (!(out.reconstruction_error < opt.reconstruction_tol))
    throw NoInvariantCurve("orbit does not fill an invariant curve (resonant rotation number?)");

  const int M = opt.grid;
  out.x.resize(M);
  out.mu.resize(M);
  parallel_for(M, [&](int m) {
    const double x = static_cast<double>(m) / M;
    const double target = chart.param_of_x(x);
    double th = target / T;
    for (int it = 0; it < 50; ++it) {
      double du;
      const double t = T * th + series(uh, th, &du);
      double diff = std::remainder(t - target, T);
      const double step = diff / (T + du);
      th -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double du;
    const double t = T * th + series(uh, th, &du);
    const double ph_v = series(ph, th, nullptr);
    const double dtheta_dx = 1.0 / (chart.dx_dparam(t) * (T + du));
    out.x[m] = x;
    out.mu[m] = 2.0 * std::sin(ph_v) * dtheta_dx;
  });
  return out;
}

inline NumericDensity kam_density_numeric(const BoundaryDomain& d, double omega, const NumericDensityOptions& opt = {}) {
  return kam_density_numeric(LazutkinChart(d), omega, opt);
}

struct NumericStackOptions {
  double h = 0.002;
  double tol = 1e-2;
  double spread_tol = 1e-5;  // half-orbit vs full-orbit agreement required at a node
  int max_moves = 12;
  NumericDensityOptions density = [] {
    NumericDensityOptions o;
    o.bounces = 1 << 15;
    return o;
  }();
};

// Stack from numerically reconstructed invariant curves. A Chebyshev node whose
// orbit has not equidistributed (near a resonance) is moved by up to 10% of h;
// the interpolant is differentiated at the nodes actually used.
inline DensityStack numeric_density_stack(const LazutkinChart& chart, double omega0, int jmax,
                                          const NumericStackOptions& opt = {}) {
  if (jmax < 0) throw DomainError("jmax must be non-negative");
  if (!(omega0 - opt.h > 0.0 && omega0 + opt.h < 0.5)) throw DomainError("stack interval must lie inside (0, 1/2)");
  const int n = 2 * jmax + 8;
  auto fit = [&](double h) {
    std::vector<double> u(n);
    std::vector<std::vector<double>> f(n);
    parallel_for(n, [&](int i) {
      const double u0 = std::cos(std::numbers::pi * (i + 0.5) / n);
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= opt.max_moves; ++k) {
        const double ui = u0 + (k % 2 == 1 ? 1.0 : -1.0) * 0.1 * ((k + 1) / 2) / opt.max_moves;
        NumericDensity d;
        try {
          d = kam_density_numeric(chart, omega0 + h * ui, opt.density);
        } catch (const NoInvariantCurve&) {
          continue;
        }
        if (d.coefficient_spread < best) {
          best = d.coefficient_spread;
          u[i] = ui;
          f[i] = std::move(d.mu);
        }
        if (best < opt.spread_tol) break;
      }
      if (f[i].empty()) throw NoInvariantCurve("no invariant curve near a stack node");
    });
    return interpolate_stack(u, f, jmax, h);
  };
  DensityStack st;
  st.omega0 = omega0;
  st.jmax = jmax;
  st.h = opt.h;
  st.nodes = n;
  st.values = fit(opt.h);
  st.grid = static_cast<int>(st.values[0].size());
  const auto alt = fit(0.75 * opt.h);
  for (int j = 0; j <= jmax; ++j) {
    const double scale = std::max(sup_norm(st.values[j]), 1e-300);
    const double dis = sup_distance(st.values[j], alt[j]) / scale;
    st.cross_check.push_back(dis);
    if (dis > opt.tol) throw DifferentiationUnstable("omega-derivative " + std::to_string(j) + " fails the cross-check");
  }
  for (int j = 0; j <= jmax; ++j) st.coefficients.push_back(half_periodic_profile(st.values[j], 513));
  return st;
}

}  // namespace brl
