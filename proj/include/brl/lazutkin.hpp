#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "brl/boundary.hpp"
#include "brl/dynamics.hpp"

namespace brl {

// x = C int_0^s rho^{-2/3}, held in the native boundary parameter t.
class LazutkinChart {
 public:
  static constexpr int kPanels = 256;

  LazutkinChart() = default;
  explicit LazutkinChart(const BoundaryDomain& d) : domain_(d) {
    auto c = d.curve_ptr();
    cum_ = PeriodicCumulative(
        [c](double t) {
          const CurveJet j = c->jet(t);
          const double k = j.curvature();
          if (!(k > 0.0) || !std::isfinite(k)) return std::numeric_limits<double>::quiet_NaN();
          return std::cbrt(k * k) * j.speed();
        },
        d.period(), kPanels);
    C_ = 1.0 / cum_.total();
  }

  const BoundaryDomain& domain() const { return domain_; }
  double C() const { return C_; }

  double x_of_param(double t) const { return C_ * cum_(t); }
  double param_of_x(double x) const { return cum_.inverse(x / C_); }
  double x_of_s(double s) const { return x_of_param(domain_.param_of_s(s)); }
  double s_of_x(double x) const { return domain_.s_of_param(param_of_x(x)); }
  double dx_dparam(double t) const { return C_ * cum_.integrand(t); }

  // m = (2 C rho^{1/3})^{-1}
  double m_of_param(double t) const { return std::cbrt(domain_.jet(t).curvature()) / (2.0 * C_); }
  double m(double x) const { return m_of_param(param_of_x(x)); }
  double rho_of_x(double x) const { return 1.0 / domain_.jet(param_of_x(x)).curvature(); }

  double y_of_param(double t, double phi) const {
    return 4.0 * C_ / std::cbrt(domain_.jet(t).curvature()) * std::sin(0.5 * phi);
  }

 private:
  BoundaryDomain domain_;
  PeriodicCumulative cum_;
  double C_ = 0.0;
};

inline LazutkinChart build_chart(const BoundaryDomain& d) { return LazutkinChart(d); }

inline double lazutkin_y(const LazutkinChart& chart, double s, double phi) {
  return chart.y_of_param(chart.domain().param_of_s(s), phi);
}

struct NearIdentityStats {
  double max_ratio_x = 0.0;  // |x1 - x - y| / y^3
  double max_ratio_y = 0.0;  // |y1 - y| / y^4
  double max_dx = 0.0;
  double max_dy = 0.0;
};

inline NearIdentityStats near_identity_residual(const LazutkinChart& chart, const std::vector<PhasePoint>& sample) {
  NearIdentityStats r;
  const BoundaryDomain& d = chart.domain();
  for (const PhasePoint& p : sample) {
    const double t = d.param_of_s(p.s);
    const double x = chart.x_of_param(t), y = chart.y_of_param(t, p.phi);
    const StepResult st = billiard_step_param(d, {t, p.phi});
    const double x1 = chart.x_of_param(t + st.advance);
    const double y1 = chart.y_of_param(st.next.t, st.next.phi);
    const double dx = std::abs(x1 - x - y), dy = std::abs(y1 - y);
    r.max_dx = std::max(r.max_dx, dx);
    r.max_dy = std::max(r.max_dy, dy);
    r.max_ratio_x = std::max(r.max_ratio_x, dx / (y * y * y));
    r.max_ratio_y = std::max(r.max_ratio_y, dy / (y * y * y * y));
  }
  return r;
}

}  // namespace brl
