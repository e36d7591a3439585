#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "brl/errors.hpp"

namespace brl {

// Even function n(x) = sum_j c_j cos(2 pi j x) on R/Z.
class EvenProfile {
 public:
  EvenProfile() = default;
  explicit EvenProfile(std::vector<double> coeffs, bool half_periodic = false, double alpha = 3.5)
      : c_(std::move(coeffs)), half_(half_periodic), alpha_(alpha) {
    if (half_)
      for (std::size_t j = 1; j < c_.size(); j += 2)
        if (c_[j] != 0.0) throw ConfigError("half-periodic profile has an odd mode");
  }

  // c[i] is the coefficient of cos(2 pi (2i) x).
  static EvenProfile from_half_coeffs(const std::vector<double>& c, double alpha = 3.5) {
    std::vector<double> full(c.empty() ? 0 : 2 * c.size() - 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) full[2 * i] = c[i];
    return EvenProfile(std::move(full), true, alpha);
  }

  static EvenProfile mode(int j, double amplitude = 1.0, double alpha = 3.5) {
    std::vector<double> c(j + 1, 0.0);
    c[j] = amplitude;
    return EvenProfile(std::move(c), j % 2 == 0, alpha);
  }

  const std::vector<double>& coeffs() const { return c_; }
  double coeff(int j) const { return j >= 0 && j < size() ? c_[j] : 0.0; }
  int size() const { return static_cast<int>(c_.size()); }
  bool half_periodic() const { return half_; }
  double alpha() const { return alpha_; }
  bool is_zero() const {
    return std::all_of(c_.begin(), c_.end(), [](double v) { return v == 0.0; });
  }

  // Value and first two derivatives in x.
  void eval(double x, double& v, double& d1, double& d2) const {
    v = d1 = d2 = 0.0;
    const double th = 2.0 * std::numbers::pi * x;
    const std::complex<double> z(std::cos(th), std::sin(th));
    std::complex<double> zj(1.0, 0.0);
    for (int j = 0; j < size(); ++j) {
      if (c_[j] != 0.0) {
        const double w = 2.0 * std::numbers::pi * j;
        v += c_[j] * zj.real();
        d1 -= c_[j] * w * zj.imag();
        d2 -= c_[j] * w * w * zj.real();
      }
      zj *= z;
      if ((j & 31) == 31) zj /= std::abs(zj);
    }
  }

  double operator()(double x) const {
    double v, d1, d2;
    eval(x, v, d1, d2);
    return v;
  }

  // sup_{j >= 1} j^alpha |c_j|
  double norm() const {
    double m = 0.0;
    for (int j = 1; j < size(); ++j) m = std::max(m, std::pow(j, alpha_) * std::abs(c_[j]));
    return m;
  }

  EvenProfile scaled(double f) const {
    std::vector<double> c = c_;
    for (double& v : c) v *= f;
    return EvenProfile(std::move(c), half_, alpha_);
  }

 private:
  std::vector<double> c_;
  bool half_ = false;
  double alpha_ = 3.5;
};

// Sequence (u_q)_{q >= q0}; u[i] holds u_{q0 + i}.
struct AlphaSequence {
  int q0 = 0;
  double alpha = 3.5;
  std::vector<double> u;

  double at(int q) const {
    const int i = q - q0;
    return i >= 0 && i < static_cast<int>(u.size()) ? u[i] : 0.0;
  }
  int q_max() const { return q0 + static_cast<int>(u.size()) - 1; }
  double norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      m = std::max(m, std::pow(static_cast<double>(q0 + i), alpha) * std::abs(u[i]));
    return m;
  }
};

}  // namespace brl
