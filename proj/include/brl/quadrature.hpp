#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "brl/errors.hpp"

namespace brl {

// Gauss-Legendre rule on [-1, 1] with N nodes.
template <int N>
struct GaussLegendre {
  std::array<double, N> x{}, w{};
  GaussLegendre() {
    using rule = boost::math::quadrature::gauss<double, N>;
    const auto& a = rule::abscissa();
    const auto& wt = rule::weights();
    int i = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[j] == 0.0) {
        x[i] = 0.0;
        w[i++] = wt[j];
      } else {
        x[i] = a[j];
        w[i++] = wt[j];
        x[i] = -a[j];
        w[i++] = wt[j];
      }
    }
  }
  template <class F>
  double integrate(F&& f, double lo, double hi) const {
    const double h = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += w[i] * f(m + h * x[i]);
    return s * h;
  }
  static const GaussLegendre& get() {
    static const GaussLegendre rule;
    return rule;
  }
};

// Cumulative integral F(t) = int_0^t f of a positive periodic integrand,
// tabulated on equal panels. Evaluation and inversion are valid on all of R.
class PeriodicCumulative {
 public:
  PeriodicCumulative() = default;
  PeriodicCumulative(std::function<double(double)> f, double period, int panels)
      : f_(std::move(f)), period_(period), h_(period / panels), cum_(panels + 1, 0.0) {
    const auto& gl = GaussLegendre<8>::get();
    for (int i = 0; i < panels; ++i) {
      const double v = gl.integrate(f_, i * h_, (i + 1) * h_);
      if (!std::isfinite(v)) throw QuadratureFailure("non-finite integrand in cumulative table");
      cum_[i + 1] = cum_[i] + v;
    }
  }

  double total() const { return cum_.back(); }
  double period() const { return period_; }
  double integrand(double t) const { return f_(t); }

  double operator()(double t) const {
    const double turns = std::floor(t / period_);
    const double r = t - turns * period_;
    int i = std::min(static_cast<int>(r / h_), panels() - 1);
    const double lo = i * h_;
    double v = cum_[i];
    if (r > lo) v += GaussLegendre<8>::get().integrate(f_, lo, r);
    return v + turns * total();
  }

  // Solves F(t) = v by panel lookup and Newton.
  double inverse(double v) const {
    const double turns = std::floor(v / total());
    double r = v - turns * total();
    if (r >= total()) r = 0.0;
    int i = static_cast<int>(std::upper_bound(cum_.begin(), cum_.end(), r) - cum_.begin()) - 1;
    i = std::clamp(i, 0, panels() - 1);
    const double lo = i * h_, hi = (i + 1) * h_;
    double t = lo + h_ * (r - cum_[i]) / (cum_[i + 1] - cum_[i]);
    for (int it = 0; it < 50; ++it) {
      const double d = ((*this)(t) - r) / f_(t);
      t = std::clamp(t - d, lo - h_, hi + h_);
      if (std::abs(d) < 1e-15 * period_) break;
    }
    return t + turns * period_;
  }

  int panels() const { return static_cast<int>(cum_.size()) - 1; }

 private:
  std::function<double(double)> f_;
  double period_ = 0.0;
  double h_ = 0.0;
  std::vector<double> cum_;
};

// Periodic trapezoid rule over [0, 1) with M nodes.
template <class F>
double periodic_mean(F&& f, int M) {
  double s = 0.0;
  for (int i = 0; i < M; ++i) s += f(static_cast<double>(i) / M);
  return s / M;
}

}  // namespace brl
