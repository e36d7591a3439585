#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "brl/errors.hpp"
#include "brl/profile.hpp"
#include "brl/quadrature.hpp"

namespace brl {

using Vec2 = Eigen::Vector2d;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

struct CurveJet {
  Vec2 p, d1, d2;
  double speed() const { return d1.norm(); }
  double curvature() const { return cross(d1, d2) / std::pow(d1.norm(), 3); }
  Vec2 tangent() const { return d1.normalized(); }
  Vec2 outward_normal() const {
    const Vec2 t = tangent();
    return Vec2(t.y(), -t.x());
  }
};

// Counterclockwise closed curve in a native parameter t of period `period()`.
class Curve {
 public:
  virtual ~Curve() = default;
  virtual CurveJet jet(double t) const = 0;
  virtual double period() const { return 2.0 * std::numbers::pi; }
};

class EllipseCurve final : public Curve {
 public:
  EllipseCurve(double a, double b) : a_(a), b_(b) {}
  CurveJet jet(double t) const override {
    const double c = std::cos(t), s = std::sin(t);
    return {Vec2(a_ * c, b_ * s), Vec2(-a_ * s, b_ * c), Vec2(-a_ * c, -b_ * s)};
  }

 private:
  double a_, b_;
};

// p -> scale * R(angle) p + shift
class SimilarityCurve final : public Curve {
 public:
  SimilarityCurve(std::shared_ptr<const Curve> inner, double scale, double angle, Vec2 shift)
      : inner_(std::move(inner)), scale_(scale), shift_(shift) {
    rot_ << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  }
  CurveJet jet(double t) const override {
    const CurveJet j = inner_->jet(t);
    const Eigen::Matrix2d A = scale_ * rot_;
    return {A * j.p + shift_, A * j.d1, A * j.d2};
  }
  double period() const override { return inner_->period(); }

 private:
  std::shared_ptr<const Curve> inner_;
  double scale_;
  Eigen::Matrix2d rot_;
  Vec2 shift_;
};

// Lazutkin coordinate of the ellipse (a cos t, b sin t) as a function of t.
// kappa^{2/3} |gamma'| = (ab)^{2/3} / |gamma'|, and 1/|gamma'| = c_0 + sum_k c_k cos(2kt).
class EllipseLazutkinParam {
 public:
  EllipseLazutkinParam() = default;
  EllipseLazutkinParam(double a, double b) : a_(a), b_(b) {
    for (int M = 64; M <= (1 << 16); M *= 2) {
      // trapezoid on the pi-periodic integrand
      std::vector<double> f(M);
      for (int i = 0; i < M; ++i) f[i] = 1.0 / speed(std::numbers::pi * i / M);
      const int K = M / 2 - 1;
      std::vector<double> c(K + 1, 0.0);
      for (int k = 0; k <= K; ++k) {
        double acc = 0.0;
        for (int i = 0; i < M; ++i) acc += f[i] * std::cos(2.0 * std::numbers::pi * ((k * i) % M) / M);
        c[k] = (k == 0 ? 1.0 : 2.0) * acc / M;
      }
      int last = -1;
      for (int k = 1; k + 4 <= K && last < 0; ++k) {
        bool small = true;
        for (int i = 0; i < 4; ++i) small = small && std::abs(c[k + i]) < 1e-15 * c[0];
        if (small) last = k;
      }
      if (last > 0 && last < K / 2) {
        c.resize(last);
        c_ = std::move(c);
        break;
      }
    }
    if (c_.empty()) throw QuadratureFailure("ellipse Lazutkin series did not converge");
    total_ = 2.0 * std::numbers::pi * c_[0];
  }

  double x(double t) const {
    const std::complex<double> z(std::cos(2.0 * t), std::sin(2.0 * t));
    std::complex<double> zk = z;
    double s = c_[0] * t;
    for (std::size_t k = 1; k < c_.size(); ++k) {
      s += c_[k] * zk.imag() / (2.0 * k);
      zk *= z;
    }
    return s / total_;
  }
  double dx(double t) const { return 1.0 / (speed(t) * total_); }
  double ddx(double t) const {
    const double w = speed(t);
    const double dw = (a_ * a_ - b_ * b_) * std::sin(t) * std::cos(t) / w;
    return -dw / (w * w * total_);
  }
  double t_of_x(double x) const {
    double t = 2.0 * std::numbers::pi * x;
    for (int it = 0; it < 60; ++it) {
      const double d = (this->x(t) - x) / dx(t);
      t -= d;
      if (std::abs(d) < 1e-15) break;
    }
    return t;
  }

 private:
  double speed(double t) const { return std::hypot(a_ * std::sin(t), b_ * std::cos(t)); }
  double a_ = 1.0, b_ = 1.0;
  std::vector<double> c_;
  double total_ = 0.0;
};

// gamma_E(t) + eps * h(x_E(t)) * N_E(t) over the ellipse (a cos t, b sin t).
class NormalGraphCurve final : public Curve {
 public:
  NormalGraphCurve(double a, double b, double eps, EvenProfile h)
      : a_(a), b_(b), eps_(eps), h_(std::move(h)), chart_(a, b) {}

  CurveJet jet(double t) const override {
    const double c = std::cos(t), s = std::sin(t);
    const Vec2 E(a_ * c, b_ * s), dE(-a_ * s, b_ * c);
    const double w = dE.norm();
    const Vec2 T = dE / w, N(T.y(), -T.x());
    const double dw = (a_ * a_ - b_ * b_) * s * c / w;
    const double kw = a_ * b_ / (w * w);  // curvature times speed
    const double dkw = -2.0 * a_ * b_ * dw / (w * w * w);

    double hv, h1, h2;
    h_.eval(chart_.x(t), hv, h1, h2);
    const double x1 = chart_.dx(t), x2 = chart_.ddx(t);
    const double H = eps_ * hv, dH = eps_ * h1 * x1, ddH = eps_ * (h2 * x1 * x1 + h1 * x2);

    const double tan1 = w + H * kw;
    const double dtan1 = dw + dH * kw + H * dkw;
    CurveJet j;
    j.p = E + H * N;
    j.d1 = tan1 * T + dH * N;
    j.d2 = (dtan1 + dH * kw) * T + (ddH - tan1 * kw) * N;
    return j;
  }

  const EllipseLazutkinParam& base_chart() const { return chart_; }

 private:
  double a_, b_, eps_;
  EvenProfile h_;
  EllipseLazutkinParam chart_;
};

struct DihedralFlags {
  bool axis = false;
  bool central = false;
};

// Strongly convex domain with arc-length access. Immutable after construction.
class BoundaryDomain {
 public:
  static constexpr int kArcPanels = 256;  // 2048 Gauss nodes

  BoundaryDomain() = default;
  explicit BoundaryDomain(std::shared_ptr<const Curve> curve) : curve_(std::move(curve)) {
    const double T = curve_->period();
    const int M = 4096;
    double turning = 0.0;
    for (int i = 0; i < M; ++i) {
      const CurveJet j = curve_->jet(T * i / M);
      const double k = j.curvature();
      if (!std::isfinite(k) || k <= 0.0)
        throw InvalidDomain("boundary is not strongly convex (curvature <= 0 on grid)");
      turning += k * j.speed() * T / M;
    }
    // positive curvature alone admits curves that wind several times
    if (std::abs(turning - 2.0 * std::numbers::pi) > 1e-3)
      throw InvalidDomain("boundary is not a simple closed convex curve (total turning != 2 pi)");
    auto c = curve_;
    arc_ = PeriodicCumulative([c](double t) { return c->jet(t).speed(); }, T, kArcPanels);
    flags_ = check(1e-10 * perimeter());
  }

  const Curve& curve() const { return *curve_; }
  std::shared_ptr<const Curve> curve_ptr() const { return curve_; }
  double period() const { return curve_->period(); }
  double perimeter() const { return arc_.total(); }

  double param_of_s(double s) const { return arc_.inverse(s); }
  double s_of_param(double t) const { return arc_(t); }
  CurveJet jet(double t) const { return curve_->jet(t); }

  Vec2 position(double s) const { return jet(param_of_s(s)).p; }
  Vec2 tangent(double s) const { return jet(param_of_s(s)).tangent(); }
  Vec2 outward_normal(double s) const { return jet(param_of_s(s)).outward_normal(); }
  double curvature(double s) const { return jet(param_of_s(s)).curvature(); }
  double radius_of_curvature(double s) const { return 1.0 / curvature(s); }

  bool axis_symmetric() const { return flags_.axis; }
  bool centrally_symmetric() const { return flags_.central; }

  // Mirror about the line through the origin and position(0); antipodal map about the origin.
  DihedralFlags check(double tol, int samples = 512) const {
    const Vec2 p0 = position(0.0);
    const Vec2 u = p0.norm() > 0 ? Vec2(p0.normalized()) : Vec2(1.0, 0.0);
    const double P = perimeter();
    DihedralFlags f{true, true};
    for (int i = 0; i < samples; ++i) {
      const double s = P * i / samples;
      const Vec2 p = position(s);
      const Vec2 mirror = 2.0 * p.dot(u) * u - p;
      if ((position(-s) - mirror).norm() > tol) f.axis = false;
      if ((position(s + 0.5 * P) + p).norm() > tol) f.central = false;
    }
    return f;
  }

  BoundaryDomain transformed(double scale, double angle = 0.0, Vec2 shift = Vec2::Zero()) const {
    return BoundaryDomain(std::make_shared<SimilarityCurve>(curve_, scale, angle, shift));
  }

 private:
  std::shared_ptr<const Curve> curve_;
  PeriodicCumulative arc_;
  DihedralFlags flags_;
};

inline DihedralFlags check_dihedral(const BoundaryDomain& d, double tol = -1.0) {
  return d.check(tol > 0 ? tol : 1e-10 * d.perimeter());
}

inline double curvature_at(const BoundaryDomain& d, double s) { return d.curvature(s); }

struct NormalizedDomain {
  BoundaryDomain domain;
  double scale = 1.0;
};

inline NormalizedDomain normalize_perimeter(const BoundaryDomain& d) {
  const double f = 1.0 / d.perimeter();
  if (std::abs(f - 1.0) < 1e-15) return {d, 1.0};
  return {d.transformed(f), f};
}

class EllipseDomain {
 public:
  EllipseDomain(double a, double b) : a_(a), b_(b) {
    if (!(b > 0.0 && a >= b && std::isfinite(a)))
      throw InvalidDomain("ellipse requires a >= b > 0");
    boundary_ = BoundaryDomain(std::make_shared<EllipseCurve>(a, b));
  }

  double a() const { return a_; }
  double b() const { return b_; }
  double eccentricity() const { return std::sqrt(1.0 - (b_ / a_) * (b_ / a_)); }
  bool is_disk() const { return a_ == b_; }
  Vec2 point(double phi) const { return Vec2(a_ * std::cos(phi), b_ * std::sin(phi)); }
  double curvature_at_param(double phi) const {
    const double s = std::sin(phi), c = std::cos(phi);
    return a_ * b_ / std::pow(a_ * a_ * s * s + b_ * b_ * c * c, 1.5);
  }
  const BoundaryDomain& boundary() const { return boundary_; }
  operator const BoundaryDomain&() const { return boundary_; }

 private:
  double a_, b_;
  BoundaryDomain boundary_;
};

inline double arclength_of_param(const EllipseDomain& e, double phi) {
  return e.boundary().s_of_param(phi);
}

inline EllipseDomain make_circle(double R) { return EllipseDomain(R, R); }

class PerturbedEllipseDomain {
 public:
  PerturbedEllipseDomain(EllipseDomain base, double epsilon, EvenProfile h)
      : base_(std::move(base)), eps_(epsilon), h_(std::move(h)) {
    boundary_ = BoundaryDomain(std::make_shared<NormalGraphCurve>(base_.a(), base_.b(), eps_, h_));
  }

  const EllipseDomain& base() const { return base_; }
  double epsilon() const { return eps_; }
  const EvenProfile& profile() const { return h_; }
  const BoundaryDomain& boundary() const { return boundary_; }
  operator const BoundaryDomain&() const { return boundary_; }

 private:
  EllipseDomain base_;
  double eps_;
  EvenProfile h_;
  BoundaryDomain boundary_;
};

}  // namespace brl
