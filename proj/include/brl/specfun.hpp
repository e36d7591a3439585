#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "brl/errors.hpp"

namespace brl {

inline void check_modulus(double k) {
  if (!(k >= 0.0 && k < 1.0)) throw DomainError("elliptic modulus must lie in [0,1)");
}

// Complete elliptic integral of the first kind K(k), modulus convention.
inline double elliptic_K(double k) {
  check_modulus(k);
  double a = 1.0, b = std::sqrt((1.0 - k) * (1.0 + k));
  for (int i = 0; i < 64 && std::abs(a - b) > 1e-16 * a; ++i) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return std::numbers::pi / (a + b);
}

// Carlson's symmetric integral R_F(x, y, z) by duplication.
inline double carlson_RF(double x, double y, double z) {
  if (x < 0 || y < 0 || z < 0 || (x + y == 0) || (x + z == 0) || (y + z == 0))
    throw DomainError("carlson_RF: invalid arguments");
  for (int i = 0; i < 200; ++i) {
    const double mu = (x + y + z) / 3.0;
    const double dx = 1.0 - x / mu, dy = 1.0 - y / mu, dz = 1.0 - z / mu;
    const double eps = std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
    if (eps < 1e-4) {
      const double e2 = dx * dy - dz * dz;
      const double e3 = dx * dy * dz;
      return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0 -
              5.0 * e2 * e2 * e2 / 208.0 + 3.0 * e3 * e3 / 104.0 + e2 * e2 * e3 / 16.0) /
             std::sqrt(mu);
    }
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lam = sx * sy + sx * sz + sy * sz;
    x = 0.25 * (x + lam);
    y = 0.25 * (y + lam);
    z = 0.25 * (z + lam);
  }
  throw ConvergenceFailure("carlson_RF did not converge");
}

// Incomplete elliptic integral of the first kind, valid for every real phi.
inline double elliptic_F(double phi, double k) {
  check_modulus(k);
  const double m = std::round(phi / std::numbers::pi);
  const double r = phi - m * std::numbers::pi;
  const double s = std::sin(r), c = std::cos(r);
  const double base = s * carlson_RF(c * c, 1.0 - k * k * s * s, 1.0);
  return m == 0.0 ? base : base + 2.0 * m * elliptic_K(k);
}

// Inverse of phi -> F(phi, k) on the real line (the Jacobi amplitude).
inline double elliptic_F_inverse(double u, double k) {
  check_modulus(k);
  const double K = elliptic_K(k);
  const double m = std::round(u / (2.0 * K));
  const double r = u - 2.0 * m * K;
  // Newton safeguarded by the bracket [-pi/2, pi/2]; F is steep there when k is near 1
  double lo = -0.5 * std::numbers::pi, hi = 0.5 * std::numbers::pi;
  double phi = r * std::numbers::pi / (2.0 * K);
  for (int i = 0; i < 200; ++i) {
    const double f = elliptic_F(phi, k) - r;
    if (f == 0.0) break;
    (f > 0.0 ? hi : lo) = phi;
    const double s = std::sin(phi);
    double next = phi - f * std::sqrt(1.0 - k * k * s * s);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - phi);
    phi = next;
    if (step < 1e-16 * std::max(1.0, std::abs(phi)) || hi - lo < 1e-16) break;
  }
  return phi + m * std::numbers::pi;
}

// Moebius function. Values up to `bound` come from a linear sieve built once.
class MoebiusTable {
 public:
  explicit MoebiusTable(std::uint32_t bound = 1000000) : mu_(bound + 1, 0) {
    std::vector<std::uint32_t> primes;
    std::vector<bool> composite(bound + 1, false);
    if (bound >= 1) mu_[1] = 1;
    for (std::uint32_t i = 2; i <= bound; ++i) {
      if (!composite[i]) {
        primes.push_back(i);
        mu_[i] = -1;
      }
      for (std::uint32_t p : primes) {
        const std::uint64_t ip = std::uint64_t(i) * p;
        if (ip > bound) break;
        composite[ip] = true;
        if (i % p == 0) {
          mu_[ip] = 0;
          break;
        }
        mu_[ip] = static_cast<std::int8_t>(-mu_[i]);
      }
    }
  }

  int operator()(std::uint64_t n) const {
    if (n == 0) throw DomainError("moebius_mu requires n >= 1");
    if (n < mu_.size()) return mu_[n];
    int sign = 1;
    for (std::uint64_t p = 2; p * p <= n; ++p) {
      if (n % p == 0) {
        n /= p;
        if (n % p == 0) return 0;
        sign = -sign;
      }
    }
    return n > 1 ? -sign : sign;
  }

  std::uint64_t bound() const { return mu_.size() - 1; }

 private:
  std::vector<std::int8_t> mu_;
};

inline int moebius_mu(std::uint64_t n) {
  static const MoebiusTable table;
  return table(n);
}

// Binomial coefficient, exact while it fits in 53 bits.
inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  long double r = 1.0L;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<double>(std::round(r));
}

// Fourier coefficients of sin^{2j}: sin^{2j} phi = sum_k s_k cos(2 k phi).
inline std::vector<double> sin_power_coeffs(int j) {
  if (j < 0) throw DomainError("sin_power_coeffs requires j >= 0");
  if (j > 500) throw DomainError("sin_power_coeffs: j beyond 500 underflows");
  std::vector<double> s(j + 1);
  if (j <= 28) {
    for (int k = 0; k <= j; ++k) {
      const double c = std::ldexp(binomial(2 * j, j - k), -2 * j);
      s[k] = k == 0 ? c : 2.0 * ((k % 2) ? -c : c);
    }
    return s;
  }
  // ratio recursion in log space keeps every entry representable
  const long double log_c0 = std::lgamma(2.0L * j + 1) - 2 * std::lgamma(j + 1.0L) -
                             2.0L * j * std::log(2.0L);
  long double log_c = log_c0;
  s[0] = static_cast<double>(std::exp(log_c));
  for (int k = 1; k <= j; ++k) {
    log_c += std::log(static_cast<long double>(j - k + 1)) - std::log(static_cast<long double>(j + k));
    const double c = static_cast<double>(2.0L * std::exp(log_c));
    s[k] = (k % 2) ? -c : c;
  }
  return s;
}

// c_j = 4^{-j} binom(2j, j), the Taylor coefficients of (1 - x)^{-1/2}.
inline double central_binomial_cj(int j) { return sin_power_coeffs(j)[0]; }

inline double zeta_partial(double alpha, long long N) {
  if (!(alpha > 1.0)) throw DomainError("zeta_partial requires alpha > 1");
  double sum = 0.0;
  for (long long p = N; p >= 1; --p) sum += std::pow(static_cast<double>(p), -alpha);
  return sum;
}

// Riemann zeta for alpha > 1 by Euler-Maclaurin with a short head.
inline double zeta(double alpha) {
  if (!(alpha > 1.0)) throw DomainError("zeta requires alpha > 1");
  const double M = 32.0;
  double sum = zeta_partial(alpha, 31);
  const double a = alpha;
  sum += std::pow(M, 1.0 - a) / (a - 1.0) + 0.5 * std::pow(M, -a);
  // Bernoulli terms B2/2!, B4/4!, B6/6!, B8/8!
  const double B[] = {1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0};
  double fact = 1.0, rising = a;
  for (int i = 0; i < 4; ++i) {
    const int n = 2 * i + 2;
    fact *= (n - 1) * n;
    sum += B[i] / fact * rising * std::pow(M, -a - n + 1);
    rising *= (a + n - 1) * (a + n);
  }
  return sum;
}

}  // namespace brl
