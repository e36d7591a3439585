#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "brl/errors.hpp"

namespace brl {

// Truncated power series c_0 + c_1 d + ... + c_J d^J.
class Taylor {
 public:
  explicit Taylor(int order = 0, double c0 = 0.0) : c_(order + 1, 0.0) { c_[0] = c0; }
  static Taylor variable(int order, double at) {
    Taylor t(order, at);
    if (order >= 1) t.c_[1] = 1.0;
    return t;
  }

  int order() const { return static_cast<int>(c_.size()) - 1; }
  double operator[](int j) const { return c_[j]; }
  double& operator[](int j) { return c_[j]; }
  double value() const { return c_[0]; }

  // j-th derivative at the expansion point
  double derivative(int j) const {
    double f = 1.0;
    for (int i = 2; i <= j; ++i) f *= i;
    return c_[j] * f;
  }

  double eval(double d) const {
    double s = 0.0;
    for (int j = order(); j >= 0; --j) s = s * d + c_[j];
    return s;
  }

  Taylor& operator+=(const Taylor& o) {
    for (int j = 0; j <= order(); ++j) c_[j] += o.c_[j];
    return *this;
  }
  Taylor& operator-=(const Taylor& o) {
    for (int j = 0; j <= order(); ++j) c_[j] -= o.c_[j];
    return *this;
  }
  Taylor& operator+=(double v) {
    c_[0] += v;
    return *this;
  }
  Taylor& operator*=(double v) {
    for (double& x : c_) x *= v;
    return *this;
  }

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
  friend Taylor operator+(Taylor a, double v) { return a += v; }
  friend Taylor operator+(double v, Taylor a) { return a += v; }
  friend Taylor operator-(Taylor a, double v) { return a += -v; }
  friend Taylor operator-(double v, const Taylor& a) { return (-1.0 * a) + v; }
  friend Taylor operator*(Taylor a, double v) { return a *= v; }
  friend Taylor operator*(double v, Taylor a) { return a *= v; }
  friend Taylor operator/(Taylor a, double v) { return a *= 1.0 / v; }

  friend Taylor operator*(const Taylor& a, const Taylor& b) {
    const int n = a.order();
    Taylor r(n);
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j) r.c_[i + j] += a.c_[i] * b.c_[j];
    return r;
  }

  friend Taylor operator/(const Taylor& a, const Taylor& b) {
    if (b.c_[0] == 0.0) throw DomainError("series division by a series vanishing at the base point");
    const int n = a.order();
    Taylor r(n);
    for (int k = 0; k <= n; ++k) {
      double s = a.c_[k];
      for (int j = 1; j <= k; ++j) s -= b.c_[j] * r.c_[k - j];
      r.c_[k] = s / b.c_[0];
    }
    return r;
  }

  friend Taylor operator/(double v, const Taylor& b) { return Taylor(b.order(), v) / b; }

  // g^alpha for g_0 > 0
  friend Taylor pow(const Taylor& g, double alpha) {
    if (!(g.c_[0] > 0.0)) throw DomainError("series power needs a positive base value");
    const int n = g.order();
    Taylor f(n, std::pow(g.c_[0], alpha));
    for (int k = 1; k <= n; ++k) {
      double s = 0.0;
      for (int j = 1; j <= k; ++j) s += (alpha * j - (k - j)) * g.c_[j] * f.c_[k - j];
      f.c_[k] = s / (k * g.c_[0]);
    }
    return f;
  }

  friend Taylor sqrt(const Taylor& g) { return pow(g, 0.5); }

  // term-wise integral with the given constant
  Taylor integral(double c0) const {
    Taylor r(order(), c0);
    for (int j = 1; j <= order(); ++j) r.c_[j] = c_[j - 1] / j;
    return r;
  }
  Taylor derivative_series() const {
    Taylor r(order());
    for (int j = 1; j <= order(); ++j) r.c_[j - 1] = j * c_[j];
    return r;
  }

  friend void sincos(const Taylor& a, Taylor& s, Taylor& c) {
    const int n = a.order();
    s = Taylor(n, std::sin(a.c_[0]));
    c = Taylor(n, std::cos(a.c_[0]));
    for (int k = 1; k <= n; ++k) {
      double ss = 0.0, cc = 0.0;
      for (int j = 1; j <= k; ++j) {
        ss += j * a.c_[j] * c.c_[k - j];
        cc -= j * a.c_[j] * s.c_[k - j];
      }
      s.c_[k] = ss / k;
      c.c_[k] = cc / k;
    }
  }

  friend Taylor asin(const Taylor& u) {
    return (u.derivative_series() / sqrt(1.0 - u * u)).integral(std::asin(u.c_[0]));
  }

  // a(b(d)) where b has no constant term requirement: expands a about b_0.
  friend Taylor compose(const Taylor& a, const Taylor& b) {
    Taylor shift = b;
    shift.c_[0] = 0.0;
    const int n = a.order();
    Taylor r(n, a.c_[n]);
    for (int j = n - 1; j >= 0; --j) r = r * shift + a.c_[j];
    return r;
  }

  // Inverse series: given w(d) = w_0 + w_1 d + ..., returns d(e) with w(d(e)) = w_0 + e.
  friend Taylor revert(const Taylor& w) {
    const int n = w.order();
    if (n >= 1 && w.c_[1] == 0.0) throw DomainError("series reversion needs a nonzero linear term");
    Taylor d(n);
    if (n == 0) return d;
    d.c_[1] = 1.0 / w.c_[1];
    Taylor hi = w;  // terms of order >= 2
    hi.c_[0] = 0.0;
    hi.c_[1] = 0.0;
    for (int it = 1; it < n; ++it) {
      const Taylor h = compose(hi, d);
      Taylor next(n);
      next.c_[1] = 1.0;
      next -= h;
      d = next * (1.0 / w.c_[1]);
    }
    return d;
  }

 private:
  std::vector<double> c_;
};

// R_F(x, y, z) on series by duplication.
inline Taylor carlson_RF(Taylor x, Taylor y, Taylor z) {
  int extra = -1;
  for (int i = 0; i < 200; ++i) {
    const Taylor mu = (x + y + z) * (1.0 / 3.0);
    const Taylor dx = 1.0 - x / mu, dy = 1.0 - y / mu, dz = 1.0 - z / mu;
    const double eps = std::max({std::abs(dx[0]), std::abs(dy[0]), std::abs(dz[0])});
    if (extra < 0 && eps < 1e-6) extra = 8;  // contract the higher coefficients as well
    if (extra == 0) {
      const Taylor e2 = dx * dy - dz * dz;
      const Taylor e3 = dx * dy * dz;
      const Taylor poly = 1.0 - e2 * (1.0 / 10.0) + e3 * (1.0 / 14.0) + e2 * e2 * (1.0 / 24.0) -
                          e2 * e3 * (3.0 / 44.0) - e2 * e2 * e2 * (5.0 / 208.0) + e3 * e3 * (3.0 / 104.0) +
                          e2 * e2 * e3 * (1.0 / 16.0);
      return poly / sqrt(mu);
    }
    if (extra > 0) --extra;
    const Taylor sx = sqrt(x), sy = sqrt(y), sz = sqrt(z);
    const Taylor lam = sx * sy + sx * sz + sy * sz;
    x = (x + lam) * 0.25;
    y = (y + lam) * 0.25;
    z = (z + lam) * 0.25;
  }
  throw ConvergenceFailure("series carlson_RF did not converge");
}

// K as a series in the parameter m = k^2.
inline Taylor elliptic_K_of_m(const Taylor& m) {
  Taylor a(m.order(), 1.0), b = sqrt(1.0 - m);
  int extra = -1;
  for (int i = 0; i < 100; ++i) {
    if (extra < 0 && std::abs(a[0] - b[0]) < 1e-15 * a[0]) extra = 6;
    if (extra == 0) break;
    if (extra > 0) --extra;
    const Taylor an = (a + b) * 0.5;
    b = sqrt(a * b);
    a = an;
  }
  return std::numbers::pi / (a + b);
}

// F(phi, k) for |phi| <= pi/2 as a series, parameter m = k^2.
inline Taylor elliptic_F_of_m(const Taylor& phi, const Taylor& m) {
  Taylor s(phi.order()), c(phi.order());
  sincos(phi, s, c);
  const Taylor one(phi.order(), 1.0);
  return s * carlson_RF(c * c, 1.0 - m * s * s, one);
}

}  // namespace brl
