#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "brl/lazutkin.hpp"
#include "brl/parallel.hpp"
#include "brl/profile.hpp"

namespace brl {

struct RotationNumber {
  int p = 1;
  int q = 2;
  RotationNumber() = default;
  RotationNumber(int p_, int q_) : p(p_), q(q_) {
    if (p < 1 || q < 2 || 2 * p > q || std::gcd(p, q) != 1)
      throw DomainError("rotation number must be p/q in lowest terms with 0 < p/q <= 1/2");
  }
  double value() const { return static_cast<double>(p) / q; }
};

enum class OrbitKind { maximal, distinguished_symmetric };

struct PeriodicOrbit {
  RotationNumber rotation;
  OrbitKind kind = OrbitKind::maximal;
  std::vector<double> params;   // lifted native parameters t_k
  std::vector<double> impacts;  // lifted arc length s_k
  std::vector<double> x;        // lifted Lazutkin coordinate x_k
  std::vector<double> angles;   // outgoing angle phi_k
  double perimeter_of_orbit = 0.0;
  double gradient_sup = 0.0;               // criticality in arc-length units
  std::vector<double> perimeter_history;   // after each ascent stage
};

namespace detail {

// Vertex t_k = base_k + sign_k * y[var_k]; var_k < 0 marks a fixed vertex.
// The vertex after t_{q-1} is t_0 + p * period.
struct OrbitLayout {
  int p = 1, q = 2;
  double period = 0.0;
  std::vector<int> var;
  std::vector<double> base, sign;
  int nvars = 0;

  std::vector<double> vertices(const Eigen::VectorXd& y) const {
    std::vector<double> t(q);
    for (int k = 0; k < q; ++k) t[k] = base[k] + (var[k] >= 0 ? sign[k] * y[var[k]] : 0.0);
    return t;
  }
  bool ordered(const std::vector<double>& t) const {
    for (int k = 0; k < q; ++k) {
      const double next = k + 1 < q ? t[k + 1] : t[0] + p * period;
      if (!(next > t[k])) return false;
    }
    return (t[0] + p * period) - t[q - 1] < period && t[q - 1] - t[0] < p * period;
  }
};

struct Evaluation {
  double perimeter = 0.0;
  Eigen::VectorXd grad;  // in reduced variables
  Eigen::MatrixXd hess;
  Eigen::VectorXd hess_diag;  // diagonal of hess, always filled
  double grad_sup_s = 0.0;  // full gradient in arc-length units
};

inline Evaluation evaluate(const BoundaryDomain& d, const OrbitLayout& L, const std::vector<double>& t,
                           bool want_hessian) {
  const int q = L.q;
  std::vector<CurveJet> J(q);
  for (int k = 0; k < q; ++k) J[k] = d.jet(t[k]);
  std::vector<Vec2> u(q);
  std::vector<double> len(q);
  Evaluation ev;
  for (int k = 0; k < q; ++k) {
    const Vec2 dv = J[(k + 1) % q].p - J[k].p;
    len[k] = dv.norm();
    if (len[k] < 1e-14) throw DegenerateChord("orbit vertices collapsed");
    u[k] = dv / len[k];
    ev.perimeter += len[k];
  }
  // chord k joins vertex k to k+1; vertex k is the second end of chord k-1
  std::vector<double> g(q), diag(q), off(q);
  for (int k = 0; k < q; ++k) {
    const int km = (k + q - 1) % q;
    const Vec2& c1 = J[k].d1;
    const Vec2& c2 = J[k].d2;
    g[k] = u[km].dot(c1) - u[k].dot(c1);
    const double a = u[km].dot(c1), b = u[k].dot(c1), n2 = c1.squaredNorm();
    diag[k] = (n2 - a * a) / len[km] + u[km].dot(c2) + (n2 - b * b) / len[k] - u[k].dot(c2);
    const int kp = (k + 1) % q;
    off[k] = -(J[kp].d1.dot(c1) - u[k].dot(J[kp].d1) * u[k].dot(c1)) / len[k];
  }
  for (int k = 0; k < q; ++k) ev.grad_sup_s = std::max(ev.grad_sup_s, std::abs(g[k]) / J[k].d1.norm());

  ev.grad = Eigen::VectorXd::Zero(L.nvars);
  ev.hess_diag = Eigen::VectorXd::Zero(L.nvars);
  for (int k = 0; k < q; ++k) {
    const int i = L.var[k];
    if (i < 0) continue;
    ev.grad[i] += L.sign[k] * g[k];
    ev.hess_diag[i] += diag[k];
    const int kp = (k + 1) % q;
    if (L.var[kp] == i) ev.hess_diag[i] += 2.0 * L.sign[k] * L.sign[kp] * off[k];
  }
  if (want_hessian) {
    ev.hess = Eigen::MatrixXd::Zero(L.nvars, L.nvars);
    for (int k = 0; k < q; ++k) {
      const int i = L.var[k];
      if (i >= 0) ev.hess(i, i) += diag[k];
      const int kp = (k + 1) % q, j = L.var[kp];
      if (i >= 0 && j >= 0) {
        const double h = L.sign[k] * L.sign[kp] * off[k];
        ev.hess(i, j) += h;
        ev.hess(j, i) += h;
      }
    }
  }
  return ev;
}

inline double perimeter_at(const BoundaryDomain& d, const OrbitLayout& L, const std::vector<double>& t) {
  double P = 0.0;
  Vec2 first = d.jet(t[0]).p, prev = first;
  for (int k = 1; k < L.q; ++k) {
    const Vec2 cur = d.jet(t[k]).p;
    P += (cur - prev).norm();
    prev = cur;
  }
  return P + (first - prev).norm();
}

struct AscentResult {
  Eigen::VectorXd y;
  std::vector<double> history;
  double grad_sup_s = 0.0;
  double perimeter = 0.0;
};

// Monotone ascent: coordinate sweeps followed by Levenberg-regularized Newton
// with backtracking. Every accepted move keeps the perimeter non-decreasing.
inline AscentResult maximize(const BoundaryDomain& d, const OrbitLayout& L, Eigen::VectorXd y, int sweeps = 2,
                             int max_newton = 2000) {
  AscentResult r;
  auto vert = [&](const Eigen::VectorXd& v) { return L.vertices(v); };
  double P = perimeter_at(d, L, vert(y));
  r.history.push_back(P);
  // rounding noise of a q-term perimeter sum
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, P) * std::sqrt(double(L.q));

  // A coordinate only moves the chords at its own vertices, so sweeps work locally.
  std::vector<std::vector<int>> verts(L.nvars), chords(L.nvars);
  for (int k = 0; k < L.q; ++k)
    if (L.var[k] >= 0) verts[L.var[k]].push_back(k);
  for (int i = 0; i < L.nvars; ++i) {
    for (int k : verts[i]) {
      chords[i].push_back((k + L.q - 1) % L.q);
      chords[i].push_back(k);
    }
    std::sort(chords[i].begin(), chords[i].end());
    chords[i].erase(std::unique(chords[i].begin(), chords[i].end()), chords[i].end());
  }
  auto point = [&](const std::vector<double>& t, int k) { return d.jet(t[(k % L.q + L.q) % L.q]).p; };
  auto local_length = [&](const std::vector<double>& t, int i) {
    double s = 0.0;
    for (int c : chords[i]) s += (point(t, c + 1) - point(t, c)).norm();
    return s;
  };
  // first and second derivative of the perimeter along coordinate i
  auto local_derivatives = [&](const std::vector<double>& t, int i, double& gi, double& hi) {
    gi = hi = 0.0;
    for (int k : verts[i]) {
      const int q = L.q, km = (k + q - 1) % q, kp = (k + 1) % q;
      const CurveJet J = d.jet(t[k]);
      const Vec2 a = J.p - point(t, km), b = point(t, kp) - J.p;
      const double la = a.norm(), lb = b.norm();
      const Vec2 ua = a / la, ub = b / lb;
      const double sa = ua.dot(J.d1), sb = ub.dot(J.d1), n2 = J.d1.squaredNorm();
      gi += L.sign[k] * (sa - sb);
      hi += (n2 - sa * sa) / la + ua.dot(J.d2) + (n2 - sb * sb) / lb - ub.dot(J.d2);
    }
  };

  for (int sw = 0; sw < sweeps && L.nvars > 0; ++sw) {
    std::vector<double> t = vert(y);
    for (int i = 0; i < L.nvars; ++i) {
      double gi, hi;
      local_derivatives(t, i, gi, hi);
      const double before = local_length(t, i);
      double step = hi < 0 ? -gi / hi : 1e-3 * L.period * (gi > 0 ? 1 : -1);
      for (int h = 0; h < 40; ++h, step *= 0.5) {
        Eigen::VectorXd yn = y;
        yn[i] += step;
        const auto tn = vert(yn);
        if (!L.ordered(tn)) continue;
        if (local_length(tn, i) >= before) {
          y = yn;
          t = tn;
          break;
        }
      }
    }
    P = perimeter_at(d, L, t);
    r.history.push_back(P);
  }

  // Newton on an integrable boundary can crawl through nearly flat directions for
  // hundreds of iterations before converging, so stagnation is judged over a window.
  double mu = 0.0, prev_grad = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_y = y;
  double best_grad = std::numeric_limits<double>::infinity(), mark_P = P, mark_grad = best_grad;
  int mark_it = 0;
  bool evaluated = false;
  for (int it = 0; it < max_newton && L.nvars > 0; ++it) {
    const Evaluation ev = evaluate(d, L, vert(y), true);
    r.grad_sup_s = ev.grad_sup_s;
    evaluated = true;
    if (P > mark_P + slack) best_grad = std::numeric_limits<double>::infinity();
    if (ev.grad_sup_s < best_grad) {
      best_grad = ev.grad_sup_s;
      best_y = y;
    }
    if (ev.grad_sup_s < 1e-14) break;
    if (ev.grad_sup_s < 1e-12 && ev.grad_sup_s > 0.5 * prev_grad) break;
    prev_grad = std::min(prev_grad, ev.grad_sup_s);
    if (P > mark_P + slack || best_grad < 0.5 * mark_grad) {
      mark_P = P;
      mark_grad = best_grad;
      mark_it = it;
    } else if (it - mark_it >= 100) {
      break;
    }
    const double scale = ev.hess.diagonal().cwiseAbs().maxCoeff();
    Eigen::VectorXd step;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::MatrixXd A = -ev.hess + Eigen::MatrixXd::Identity(L.nvars, L.nvars) * (mu * scale);
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(ev.grad);
        break;
      }
      mu = mu == 0.0 ? 1e-10 : mu * 10.0;
    }
    if (step.size() == 0) break;
    bool accepted = false;
    double alpha = 1.0;
    for (int h = 0; h < 50; ++h, alpha *= 0.5) {
      const Eigen::VectorXd yn = y + alpha * step;
      const auto tn = vert(yn);
      if (!L.ordered(tn)) continue;
      const double Pn = perimeter_at(d, L, tn);
      if (Pn >= P - slack) {
        y = yn;
        P = std::max(P, Pn);
        accepted = true;
        break;
      }
    }
    r.history.push_back(P);
    mu *= 0.1;
    evaluated = false;
    if (!accepted || step.lpNorm<Eigen::Infinity>() < 1e-15 * L.period) break;
  }
  if (L.nvars == 0 || !evaluated) r.grad_sup_s = evaluate(d, L, vert(y), false).grad_sup_s;
  // fall back to the most critical iterate at the final perimeter level
  if (best_grad < r.grad_sup_s) {
    y = best_y;
    r.grad_sup_s = best_grad;
  }
  P = perimeter_at(d, L, vert(y));
  r.y = y;
  r.perimeter = P;
  return r;
}

inline PeriodicOrbit assemble(const LazutkinChart& chart, const OrbitLayout& L, const AscentResult& a,
                              RotationNumber rot, OrbitKind kind) {
  const BoundaryDomain& d = chart.domain();
  PeriodicOrbit o;
  o.rotation = rot;
  o.kind = kind;
  o.params = L.vertices(a.y);
  o.perimeter_history = a.history;
  o.gradient_sup = a.grad_sup_s;
  const int q = L.q;
  std::vector<CurveJet> J(q);
  for (int k = 0; k < q; ++k) J[k] = d.jet(o.params[k]);
  for (int k = 0; k < q; ++k) {
    const Vec2 dv = J[(k + 1) % q].p - J[k].p;
    o.perimeter_of_orbit += dv.norm();
    const Vec2 u = dv.normalized();
    const Vec2 T = J[k].tangent();
    o.angles.push_back(std::atan2(u.dot(inward_normal(T)), u.dot(T)));
    o.impacts.push_back(d.s_of_param(o.params[k]));
    o.x.push_back(chart.x_of_param(o.params[k]));
  }
  return o;
}

}  // namespace detail

inline constexpr double kCriticalityTol = 1e-9;

// Birkhoff maximal orbit of rotation p/q. Several Lazutkin-equispaced starts
// are tried; the largest perimeter wins, earlier starts win ties.
inline PeriodicOrbit max_perimeter_orbit(const LazutkinChart& chart, RotationNumber rot) {
  const BoundaryDomain& d = chart.domain();
  const int q = rot.q, p = rot.p;
  detail::OrbitLayout L;
  L.p = p;
  L.q = q;
  L.period = d.period();
  L.nvars = q;
  L.var.resize(q);
  L.base.assign(q, 0.0);
  L.sign.assign(q, 1.0);
  std::iota(L.var.begin(), L.var.end(), 0);

  const double starts[] = {0.0, 0.5 / q, 0.25, 0.25 + 0.5 / q};
  PeriodicOrbit best;
  bool have = false;
  for (double x0 : starts) {
    Eigen::VectorXd y(q);
    for (int k = 0; k < q; ++k) y[k] = chart.param_of_x(x0 + static_cast<double>(k) * p / q);
    const detail::AscentResult a = detail::maximize(d, L, y);
    if (a.grad_sup_s > kCriticalityTol) continue;
    PeriodicOrbit o = detail::assemble(chart, L, a, rot, OrbitKind::maximal);
    if (!have || o.perimeter_of_orbit > best.perimeter_of_orbit * (1.0 + 1e-13)) {
      best = std::move(o);
      have = true;
    }
  }
  if (!have) throw ConvergenceFailure("max_perimeter_orbit: no start reached a critical configuration");
  return best;
}

inline PeriodicOrbit max_perimeter_orbit(const BoundaryDomain& d, RotationNumber rot) {
  return max_perimeter_orbit(LazutkinChart(d), rot);
}

// Symmetric 1/q orbit with t_0 = 0 and t_{-k} = -t_k, maximal among such.
inline PeriodicOrbit distinguished_symmetric_orbit(const LazutkinChart& chart, int q) {
  if (q < 2) throw DomainError("distinguished orbit requires q >= 2");
  const BoundaryDomain& d = chart.domain();
  const double T = d.period();
  detail::OrbitLayout L;
  L.p = 1;
  L.q = q;
  L.period = T;
  L.var.assign(q, -1);
  L.base.assign(q, 0.0);
  L.sign.assign(q, 1.0);
  const int m = (q - 1) / 2;
  L.nvars = m;
  for (int i = 1; i <= m; ++i) {
    L.var[i] = i - 1;
    L.var[q - i] = i - 1;
    L.base[q - i] = T;
    L.sign[q - i] = -1.0;
  }
  if (q % 2 == 0) L.base[q / 2] = 0.5 * T;
  Eigen::VectorXd y(m);
  for (int i = 1; i <= m; ++i) y[i - 1] = chart.param_of_x(static_cast<double>(i) / q);
  const detail::AscentResult a = detail::maximize(d, L, y);
  if (a.grad_sup_s > kCriticalityTol)
    throw ConvergenceFailure("distinguished_symmetric_orbit: gradient did not vanish");
  PeriodicOrbit o = detail::assemble(chart, L, a, RotationNumber(1, q), OrbitKind::distinguished_symmetric);
  const double P = d.perimeter();
  for (int k = 1; k < q; ++k) {
    // s_{-k} = s_{q-k} - P
    if (std::abs(o.impacts[q - k] - P + o.impacts[k]) > 1e-9 * P)
      throw SymmetryViolation("distinguished orbit breaks s_{-k} = -s_k");
  }
  if (std::abs(o.impacts[0]) > 1e-9 * P) throw SymmetryViolation("distinguished orbit does not start at s = 0");
  return o;
}

inline PeriodicOrbit distinguished_symmetric_orbit(const BoundaryDomain& d, int q) {
  return distinguished_symmetric_orbit(LazutkinChart(d), q);
}

// sum_k f(x_k) sin phi_k
template <class F>
double ell_q(const PeriodicOrbit& o, F&& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < o.x.size(); ++k) s += f(o.x[k]) * std::sin(o.angles[k]);
  return s;
}

inline double ell_q(const PeriodicOrbit& o, const EvenProfile& n) {
  return ell_q(o, [&](double x) { return n(x); });
}

// Delta(g)_q = (1/q) sum_k g(k/q) - mean(g)
template <class F>
double delta_sampled(F&& g, int q, double mean) {
  double s = 0.0;
  for (int k = 0; k < q; ++k) s += g(static_cast<double>(k) / q);
  return s / q - mean;
}

struct TailFit {
  double ell0 = 0.0;
  double ellbullet = 0.0;
  double c4 = 0.0;
  std::vector<int> q;
  std::vector<double> data;            // ell_q(n) - Delta(m n)_q
  std::vector<double> head_residuals;  // data - ell0 - ellbullet / q^2
  std::vector<double> fit_residuals;   // data minus the full three-term fit
  double condition = 0.0;
};

// Least squares of data_q on {1, q^-2, q^-4}, rows weighted by q^weight_power.
inline TailFit fit_tail(const std::vector<int>& qs, const std::vector<double>& data, double weight_power = 0.0) {
  if (qs.size() < 8) throw IllConditionedFit("tail fit needs at least 8 values of q");
  const int n = static_cast<int>(qs.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    const double iq2 = 1.0 / (static_cast<double>(qs[i]) * qs[i]);
    A(i, 0) = 1.0;
    A(i, 1) = iq2;
    A(i, 2) = iq2 * iq2;
    b[i] = data[i];
    w[i] = weight_power == 0.0 ? 1.0 : std::pow(static_cast<double>(qs[i]), weight_power);
  }
  // column scaling keeps the reported conditioning about the basis, not units
  const Eigen::MatrixXd Aw = w.asDiagonal() * A;
  Eigen::Vector3d colscale = Aw.colwise().norm().transpose();
  const Eigen::MatrixXd As = Aw * colscale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(As);
  const auto sv = svd.singularValues();
  TailFit f;
  f.condition = (sv[0] / sv[2]) * (sv[0] / sv[2]);
  if (!(f.condition < 1e12)) throw IllConditionedFit("tail fit normal equations are ill-conditioned");
  const Eigen::Vector3d c = As.colPivHouseholderQr().solve(w.cwiseProduct(b)).cwiseQuotient(colscale);
  f.ell0 = c[0];
  f.ellbullet = c[1];
  f.c4 = c[2];
  f.q = qs;
  f.data = data;
  for (int i = 0; i < n; ++i) {
    f.head_residuals.push_back(data[i] - c[0] - c[1] * A(i, 1));
    f.fit_residuals.push_back(data[i] - (A.row(i) * c)(0));
  }
  return f;
}

// Fits ell_q(n) - Delta(m n)_q over the given q using distinguished orbits.
// Rows carry weight q^4 so the O(q^-4) remainder has uniform size.
inline TailFit expansion_tail_fit(const LazutkinChart& chart, const EvenProfile& n, const std::vector<int>& qs,
                                  int mean_nodes = 4096) {
  auto mn = [&](double x) { return chart.m(x) * n(x); };
  const double mean = periodic_mean(mn, mean_nodes);
  std::vector<double> data(qs.size());
  parallel_for(static_cast<int>(qs.size()), [&](int i) {
    const PeriodicOrbit o = distinguished_symmetric_orbit(chart, qs[i]);
    data[i] = ell_q(o, n) - delta_sampled(mn, qs[i], mean);
  });
  return fit_tail(qs, data, 4.0);
}

}  // namespace brl
