#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "brl/boundary.hpp"

namespace brl {

struct PhasePoint {
  double s = 0.0;
  double phi = 0.0;
};

// Billiard state in the native boundary parameter (lifted t).
struct ParamState {
  double t = 0.0;
  double phi = 0.0;
};

struct StepResult {
  ParamState next;      // next.t reduced to [0, period)
  double advance = 0.0; // parameter advance in (0, period)
  double chord = 0.0;
};

struct OrbitSegment {
  std::vector<PhasePoint> points;
  std::vector<double> chords;
  double length = 0.0;
};

inline Vec2 inward_normal(const Vec2& T) { return Vec2(-T.y(), T.x()); }

inline Vec2 outgoing_direction(const CurveJet& j, double phi) {
  const Vec2 T = j.tangent();
  return std::cos(phi) * T + std::sin(phi) * inward_normal(T);
}

// Next impact from (t, phi). The chord angle psi(t1) measured from the
// tangent at t increases from 0 to pi on (t, t + period); we solve psi = phi
// with safeguarded Newton. dt_guess in (0, period) skips the coarse scan.
inline StepResult billiard_step_param(const BoundaryDomain& d, ParamState st, double dt_guess = -1.0) {
  if (!(st.phi > 0.0 && st.phi < std::numbers::pi))
    throw DomainError("reflection angle must lie in (0, pi)");
  const double T = d.period();
  const CurveJet j0 = d.jet(st.t);
  const Vec2 T0 = j0.tangent();

  auto g = [&](double t1, double* dg, CurveJet* jet_out) {
    const CurveJet j1 = d.jet(t1);
    const Vec2 dv = j1.p - j0.p;
    const double psi = std::atan2(cross(T0, dv), T0.dot(dv));
    if (dg) *dg = cross(dv, j1.d1) / dv.squaredNorm();
    if (jet_out) *jet_out = j1;
    return psi - st.phi;
  };

  double lo = st.t, hi = st.t + T;
  double x;
  if (dt_guess > 0.0 && dt_guess < T) {
    x = st.t + dt_guess;
  } else {
    const int n = 64;
    double prev = st.t;
    x = st.t + 0.5 * T;
    for (int i = 1; i < n; ++i) {
      const double ti = st.t + T * i / n;
      if (g(ti, nullptr, nullptr) >= 0.0) {
        lo = prev;
        hi = ti;
        x = 0.5 * (lo + hi);
        break;
      }
      prev = ti;
      if (i == n - 1) {
        lo = ti;
        x = 0.5 * (lo + hi);
      }
    }
  }

  CurveJet j1;
  for (int it = 0; it < 200; ++it) {
    double dg;
    const double gv = g(x, &dg, &j1);
    if (gv < 0.0) lo = std::max(lo, x);
    else if (gv > 0.0) hi = std::min(hi, x);
    double xn = gv == 0.0 ? x : x - gv / dg;
    if (gv != 0.0 && (!(xn > lo && xn < hi) || !std::isfinite(xn))) xn = 0.5 * (lo + hi);
    const double step = std::abs(xn - x);
    x = xn;
    const double tol = std::max(1e-15 * T, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x));
    if (step < tol || hi - lo < tol) {
      g(x, nullptr, &j1);
      StepResult r;
      const Vec2 dv = j1.p - j0.p;
      r.chord = dv.norm();
      const Vec2 u = dv / r.chord;
      const Vec2 T1 = j1.tangent();
      r.advance = x - st.t;
      double tn = std::fmod(x, T);
      if (tn < 0) tn += T;
      r.next = {tn, std::atan2(u.dot(j1.outward_normal()), u.dot(T1))};
      return r;
    }
  }
  throw ConvergenceFailure("billiard_step: next impact not found");
}

inline PhasePoint billiard_step(const BoundaryDomain& d, PhasePoint p, double* chord = nullptr) {
  const StepResult r = billiard_step_param(d, {d.param_of_s(p.s), p.phi});
  if (chord) *chord = r.chord;
  const double P = d.perimeter();
  double s = std::fmod(d.s_of_param(r.next.t), P);
  if (s < 0) s += P;
  return {s, r.next.phi};
}

// Orbit in parameter space; advances are kept so rotation can be read off.
inline std::vector<StepResult> billiard_orbit_param(const BoundaryDomain& d, ParamState start, int n) {
  std::vector<StepResult> out;
  out.reserve(n);
  double guess = -1.0;
  ParamState st = start;
  for (int k = 0; k < n; ++k) {
    const StepResult r = billiard_step_param(d, st, guess);
    guess = r.advance;
    st = r.next;
    out.push_back(r);
  }
  return out;
}

inline OrbitSegment billiard_orbit(const BoundaryDomain& d, PhasePoint start, int n) {
  OrbitSegment seg;
  seg.points.push_back(start);
  const double P = d.perimeter();
  const auto steps = billiard_orbit_param(d, {d.param_of_s(start.s), start.phi}, n);
  for (const auto& r : steps) {
    double s = std::fmod(d.s_of_param(r.next.t), P);
    if (s < 0) s += P;
    seg.points.push_back({s, r.next.phi});
    seg.chords.push_back(r.chord);
    seg.length += r.chord;
  }
  return seg;
}

struct GeneratingValue {
  double L, dL_ds0, dL_ds1;
};

// L(s0, s1) = -|gamma(s1) - gamma(s0)|
inline GeneratingValue generating_value_and_partials(const BoundaryDomain& d, double s0, double s1) {
  const CurveJet j0 = d.jet(d.param_of_s(s0)), j1 = d.jet(d.param_of_s(s1));
  const Vec2 dv = j1.p - j0.p;
  const double len = dv.norm();
  if (len < 1e-12 * d.perimeter()) throw DegenerateChord("generating function: degenerate chord");
  const Vec2 u = dv / len;
  return {-len, u.dot(j0.tangent()), -u.dot(j1.tangent())};
}

inline double joachimsthal_invariant(const EllipseDomain& e, PhasePoint p) {
  const CurveJet j = e.boundary().jet(e.boundary().param_of_s(p.s));
  const Vec2 v = outgoing_direction(j, p.phi);
  return j.p.x() * v.x() / (e.a() * e.a()) + j.p.y() * v.y() / (e.b() * e.b());
}

struct CausticInfo {
  double lambda = 0.0;
  bool hyperbolic = false;  // lambda >= b: the caustic is a confocal hyperbola
};

inline CausticInfo caustic_parameter(const EllipseDomain& e, PhasePoint p) {
  const double lam = -e.a() * e.b() * joachimsthal_invariant(e, p);
  return {lam, lam >= e.b()};
}

// Distance between the line through p0, p1 and tangency to the confocal
// ellipse X^2/(a^2 - lam^2) + Y^2/(b^2 - lam^2) = 1.
inline double caustic_tangency_distance(const EllipseDomain& e, double lam, const Vec2& p0, const Vec2& p1) {
  const Vec2 dir = (p1 - p0).normalized();
  const Vec2 n(-dir.y(), dir.x());
  const double A = e.a() * e.a() - lam * lam, B = e.b() * e.b() - lam * lam;
  return std::abs(std::abs(n.dot(p0)) - std::sqrt(A * n.x() * n.x() + B * n.y() * n.y()));
}

// Normalized weights exp(-1/(t(1-t))) at t = (k+1)/(N+1).
inline std::vector<double> birkhoff_weights(int N) {
  std::vector<double> w(N);
  double total = 0.0;
  for (int k = 0; k < N; ++k) {
    const double t = (k + 1.0) / (N + 1.0);
    w[k] = std::exp(-1.0 / (t * (1.0 - t)));
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

// Weighted Birkhoff average of the parameter advance per bounce, in turns.
inline double rotation_number_estimate(const BoundaryDomain& d, ParamState start, int N) {
  const auto steps = billiard_orbit_param(d, start, N);
  const auto w = birkhoff_weights(N);
  double acc = 0.0;
  for (int k = 0; k < N; ++k) acc += w[k] * steps[k].advance;
  return acc / d.period();
}

}  // namespace brl
