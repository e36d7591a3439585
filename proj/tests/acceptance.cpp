// Acceptance checks. Usage: acceptance [criterion ...]; no argument runs all.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "brl/rigidity.hpp"

using namespace brl;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::vector<double> random_half_coeffs(std::mt19937_64& rng, int count, double decay) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> c(count);
  for (int j = 0; j < count; ++j) c[j] = U(rng) * (decay > 0 ? std::pow(std::max(1, 2 * j), -decay) : 1.0);
  return c;
}

double loglog_slope(const std::vector<int>& qs, const std::vector<double>& r) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double x = std::log(qs[i]), y = std::log(std::abs(r[i]));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

// Moebius inversion round trip on 512-mode profiles
Outcome c1() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto c = random_half_coeffs(rng, 512, 0.0);
    c[0] = 0.0;
    const EvenProfile n = EvenProfile::from_half_coeffs(c);
    const EvenProfile back = moebius_op(dirichlet_sym(n, 1, 511));
    for (int j = 1; j < 512; ++j) worst = std::max(worst, std::abs(back.coeff(2 * j) - c[j]));
    AlphaSequence u{1, 3.5, random_half_coeffs(rng, 511, 0.0)};
    const AlphaSequence again = dirichlet_sym(moebius_op(u), 1, 511);
    for (int q = 1; q <= 511; ++q) worst = std::max(worst, std::abs(again.at(q) - u.at(q)));
  }
  return {worst < 1e-12, fmt("max coefficient error %.3g over 100 profiles, both compositions", worst)};
}

// Dirichlet norm bound
Outcome c2() {
  std::mt19937_64 rng(2);
  const double alpha = 3.5, bound = zeta(alpha) * std::pow(2.0, -alpha);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto c = random_half_coeffs(rng, 512, alpha);
    const EvenProfile n = EvenProfile::from_half_coeffs(c, alpha);
    worst = std::max(worst, dirichlet_sym(n, 1, 511).norm() / n.norm());
  }
  return {worst <= bound * (1 + 1e-12), fmt("max ratio %.6f, bound zeta(3.5)/2^3.5 = %.6f", worst, bound)};
}

// sin-power expansion and its diagonal
Outcome c3() {
  double err = 0.0;
  bool diag = true;
  for (int j = 0; j <= 20; ++j) {
    const auto s = sin_power_coeffs(j);
    for (int m = 0; m < 2048; ++m) {
      const double phi = 2.0 * std::numbers::pi * m / 2048;
      double v = 0.0;
      for (int k = 0; k <= j; ++k) v += s[k] * std::cos(2.0 * k * phi);
      err = std::max(err, std::abs(v - std::pow(std::sin(phi), 2 * j)));
    }
    const double expected = j == 0 ? 1.0 : (j % 2 ? -2.0 : 2.0);
    if (std::ldexp(s[j], 2 * j) != expected) diag = false;
  }
  return {err < 1e-10 && diag, fmt("grid error %.3g, diagonal exact: %s", err, diag ? "yes" : "no")};
}

// Joachimsthal conservation and caustic tangency
Outcome c4() {
  const EllipseDomain E(2.0, 1.0);
  const BoundaryDomain& d = E.boundary();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> T(0.0, d.period()), A(0.05, std::numbers::pi - 0.05);
  double drift = 0.0, tangency = 0.0;
  int elliptic = 0;
  for (int i = 0; i < 100; ++i) {
    ParamState st{T(rng), A(rng)};
    auto J = [&](const ParamState& p) { return joachimsthal_invariant(E, {d.s_of_param(p.t), p.phi}); };
    const double J0 = J(st);
    const CausticInfo ci = caustic_parameter(E, {d.s_of_param(st.t), st.phi});
    const bool tangent = ci.lambda > 0.0 && !ci.hyperbolic;
    elliptic += tangent;
    for (int k = 0; k < 10000; ++k) {
      const StepResult r = billiard_step_param(d, st);
      if (tangent) tangency = std::max(tangency, caustic_tangency_distance(E, ci.lambda, d.jet(st.t).p, d.jet(r.next.t).p));
      st = r.next;
      drift = std::max(drift, std::abs(J(st) - J0));
    }
  }
  return {drift < 1e-8 && tangency < 1e-9,
          fmt("max drift %.3g over 1e6 bounces, tangency %.3g on %d caustic orbits", drift, tangency, elliptic)};
}

// circle beta
Outcome c5() {
  const BoundaryDomain disk = normalize_perimeter(make_circle(1.0).boundary()).domain;
  const LazutkinChart chart(disk);
  double err = 0.0;
  for (int q = 2; q <= 64; ++q)
    err = std::max(err, std::abs(beta_rational(chart, RotationNumber(1, q)) + std::sin(std::numbers::pi / q) / std::numbers::pi));
  return {err < 1e-10, fmt("max |beta(1/q) + sin(pi/q)/pi| = %.3g for q = 2..64", err)};
}

// Second difference on a non-uniform grid, scaled to agree with b+ - 2b + b- on a uniform one.
double second_difference(double w0, double w1, double w2, double b0, double b1, double b2) {
  const double h1 = w1 - w0, h2 = w2 - w1;
  return 2.0 * (h2 * b0 - (h1 + h2) * b1 + h1 * b2) / (h1 + h2);
}

double worst_second_difference(const std::vector<RotationNumber>& rots, const std::vector<double>& beta, int* positive) {
  double worst = std::numeric_limits<double>::infinity();
  *positive = 0;
  for (std::size_t i = 1; i + 1 < rots.size(); ++i) {
    const double dd = second_difference(rots[i - 1].value(), rots[i].value(), rots[i + 1].value(), beta[i - 1], beta[i],
                                        beta[i + 1]);
    worst = std::min(worst, dd);
    *positive += dd > 0.0;
  }
  return worst;
}

// beta convexity over {1/q} and over all p/q <= 1/2 with q <= 50
Outcome c6() {
  const EllipseDomain E(2.0, 1.0);
  const LazutkinChart chart(E.boundary());
  std::vector<RotationNumber> rots;
  for (int q = 2; q <= 50; ++q)
    for (int p = 1; 2 * p <= q; ++p)
      if (std::gcd(p, q) == 1) rots.emplace_back(p, q);
  std::sort(rots.begin(), rots.end(), [](auto a, auto b) { return a.value() < b.value(); });
  std::vector<double> beta(rots.size());
  parallel_for(static_cast<int>(rots.size()), [&](int i) { beta[i] = beta_rational(chart, rots[i]); });
  std::vector<RotationNumber> unit;
  std::vector<double> unit_beta;
  for (std::size_t i = 0; i < rots.size(); ++i)
    if (rots[i].p == 1) {
      unit.push_back(rots[i]);
      unit_beta.push_back(beta[i]);
    }
  int pos_all = 0, pos_unit = 0;
  const double w_all = worst_second_difference(rots, beta, &pos_all);
  const double w_unit = worst_second_difference(unit, unit_beta, &pos_unit);
  const bool ok = w_all > -1e-10 && w_unit > -1e-10;
  return {ok, fmt("min second difference %.3g on {1/q} (%d/%zu positive), %.3g on %zu rationals (%d positive)", w_unit,
                  pos_unit, unit.size() - 2, w_all, rots.size(), pos_all)};
}

// two routes to beta on the ellipse
Outcome c7() {
  const EllipseDomain E(2.0, 1.0);
  const LazutkinChart chart(E.boundary());
  const RotationNumber rots[] = {{1, 3}, {1, 4}, {2, 5}, {1, 6}, {3, 7}, {3, 8}, {2, 9}, {3, 10}, {5, 11}, {1, 12}};
  double err = 0.0;
  for (const auto& r : rots) err = std::max(err, std::abs(beta_rational(chart, r) - beta_on_invariant_curve(E, r.value())));
  return {err < 1e-8, fmt("max disagreement %.3g over 10 rotation numbers", err)};
}

// rotation number of the caustic family
Outcome c8() {
  const EllipseDomain E(2.0, 1.0);
  const double b = E.b();
  bool monotone = true;
  double prev = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double w = caustic_rotation_number(E, b * i / 101.0);
    if (!(w > prev)) monotone = false;
    prev = w;
  }
  double err = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double lam = b * (i - 0.5) / 10.0;
    const double est = rotation_number_estimate(E.boundary(), {0.5 * std::numbers::pi, std::asin(lam / E.a())}, 1 << 16);
    err = std::max(err, std::abs(est - caustic_rotation_number(E, lam)));
  }
  return {monotone && err < 1e-9, fmt("monotone on 100 points: %s, Birkhoff vs formula %.3g", monotone ? "yes" : "no", err)};
}

// tau-derivative of beta against finite differences on q = 101
Outcome c9() {
  const EllipseDomain E(2.0, 1.0);
  const DensitySource mu = ellipse_density_source(E);
  const auto fam = DeformationFamily::normal_profile(E, EvenProfile::from_half_coeffs({0.0, 1.0, 0.3}));
  const auto scl = DeformationFamily::scaling(E.boundary());
  double fd_err = 0.0, scale_err = 0.0;
  for (int p : {10, 15, 20}) {
    const RotationNumber r(p, 101);
    const double pairing_value = tau_derivative_beta(fam, r.value(), mu);
    fd_err = std::max(fd_err, std::abs(beta_tau_difference(fam, r) / pairing_value - 1.0));
    const double beta = beta_on_invariant_curve(E, r.value());
    scale_err = std::max(scale_err, std::abs(tau_derivative_beta(scl, r.value(), mu) / beta - 1.0));
  }
  return {fd_err < 1e-6 && scale_err < 1e-6,
          fmt("relative error vs finite differences %.3g, dilation identity %.3g", fd_err, scale_err)};
}

// Euclidean families are invisible to beta
Outcome c10() {
  const EllipseDomain E(2.0, 1.0);
  const DensitySource mu = ellipse_density_source(E);
  const std::vector<double> omegas = {(std::sqrt(5.0) - 2.0) / 2.0, (std::sqrt(2.0) - 1.0) / 2.0, (std::sqrt(3.0) - 1.0) / 4.0};
  for (double w : omegas)
    if (!diophantine_member({}, w).member) return {false, fmt("omega %.6f is not Diophantine", w)};
  double worst = 0.0;
  for (const auto& f : {DeformationFamily::rotation(E.boundary()), DeformationFamily::translation(E.boundary(), Vec2(0.3, -0.7))})
    for (double v : orthogonality_check(f, omegas, mu)) worst = std::max(worst, v);
  return {worst < 1e-8, fmt("max |int n mu| = %.3g for rotation and translation", worst)};
}

// tail of the expansion of ell_q
Outcome c11() {
  const EllipseDomain E(2.0, 1.0);
  const LazutkinChart chart(normalize_perimeter(E.boundary()).domain);
  std::vector<int> qs;
  for (int q = 16; q <= 256; q = static_cast<int>(std::lround(q * 1.25))) qs.push_back(q);
  const TailFit f = expansion_tail_fit(chart, EvenProfile::from_half_coeffs({0.3, 1.0, 0.5, 0.25}), qs);
  const double slope = loglog_slope(qs, f.head_residuals);
  return {slope <= -3.5, fmt("log-log slope of the remainder %.3f on q = 16..256", slope)};
}

// disk limit of the density
Outcome c12() {
  const double w = 0.2, target = 2.0 * std::sin(std::numbers::pi * w);
  std::vector<double> dist;
  for (double e : {0.2, 0.1, 0.05}) {
    const EllipseDensity dens(EllipseDomain(1.0, std::sqrt(1.0 - e * e)), 4096);
    double m = 0.0;
    for (double v : dens(w)) m = std::max(m, std::abs(v - target));
    dist.push_back(m);
  }
  const bool ok = dist[1] < dist[0] && dist[2] < dist[1];
  return {ok, fmt("sup |mu - 2 sin(pi w)| = %.3g, %.3g, %.3g for e = 0.2, 0.1, 0.05", dist[0], dist[1], dist[2])};
}

// totality of the derivative densities
Outcome c13() {
  constexpr double kGolden = 0.0583157486076272;
  const EllipseDomain E(2.0, 1.0);
  const int q0 = 2, modes = 8;
  const DensityStack st = density_omega_derivatives(E, 0.1, q0 + 8, 4096, 1e-6, true);
  Eigen::MatrixXd P(st.jmax + 1, modes);
  for (int j = 0; j <= st.jmax; ++j)
    for (int i = 0; i < modes; ++i) P(j, i) = st.coefficients[j].coeff(2 * i);
  const Eigen::VectorXd sv = P.bdcSvd().singularValues();
  const double smin = sv[modes - 1];
  const bool golden = std::abs(smin / kGolden - 1.0) < 1e-6;
  return {smin > 1e-10 && golden, fmt("sigma_min %.15g (golden %.15g)", smin, kGolden)};
}

// invertibility of T on the ellipse and recovery of candidates
Outcome c14() {
  const EllipseDomain E(2.0, 1.0);
  const TPipeline p = t_pipeline(E.boundary(), &E, {});
  const int q0 = p.T.spec.q0;
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto r = rigidity_residual(p, EvenProfile::from_half_coeffs(random_half_coeffs(rng, q0 + 32, 3.5)));
    worst = std::max(worst, r.recovered_error);
  }
  const bool stable = p.report.stable_under_doubling.value_or(false);
  std::string J;
  for (int j : p.T.spec.J) J += (J.empty() ? "" : ",") + std::to_string(j);
  return {p.report.kernel_dim == 0 && stable && worst < 1e-6,
          fmt("q0 %d J {%s} sigma_min %.4g (2N %.4g) kernel %d, worst recovery %.3g", q0, J.c_str(), p.report.sigma_min,
              p.report.sigma_min_doubled.value_or(0.0), p.report.kernel_dim, worst)};
}

// stability of T under a small perturbation of the ellipse
Outcome c15() {
  const double w0 = (std::sqrt(5.0) - 2.0) / 2.0;
  TPipelineOptions o;
  o.q0 = 2;
  o.J = {0, 1};
  o.omega0 = w0;
  const EllipseDomain E(2.0, 1.0);
  const PerturbedEllipseDomain D(E, 1e-4, EvenProfile::from_half_coeffs({0.0, 1.0}));
  const TPipeline pe = t_pipeline(E.boundary(), &E, o);
  const TPipeline pd = t_pipeline(D.boundary(), nullptr, o);
  const double rel = std::abs(pd.report.sigma_min / pe.report.sigma_min - 1.0);
  const bool ok = pd.report.kernel_dim == 0 && pd.report.stable_under_doubling.value_or(false) && rel < 0.1;
  return {ok, fmt("sigma_min %.6g vs ellipse %.6g (relative %.3g), kernel %d", pd.report.sigma_min, pe.report.sigma_min,
                  rel, pd.report.kernel_dim)};
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"Moebius inverts Dirichlet", c1},
    {"Dirichlet norm bound", c2},
    {"sin-power expansion", c3},
    {"Joachimsthal invariant", c4},
    {"circle beta", c5},
    {"beta convexity", c6},
    {"beta by orbits and by caustics", c7},
    {"caustic rotation numbers", c8},
    {"tau-derivative of beta", c9},
    {"Euclidean orthogonality", c10},
    {"ell_q expansion tail", c11},
    {"disk limit of mu", c12},
    {"density totality", c13},
    {"T invertible on the ellipse", c14},
    {"T stable under perturbation", c15},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int i = 1; i <= 15; ++i) which.push_back(i);
  int failed = 0;
  for (int id : which) {
    if (id < 1 || id > 15) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const Criterion& c = kCriteria[id - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
