#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "brl/boundary.hpp"
#include "brl/lazutkin.hpp"
#include "brl/operators.hpp"
#include "brl/spectrum.hpp"

namespace brl {

// Sign convention for the tau-derivative of beta: d beta / d tau = -int n mu dx, mu >= 0.
inline constexpr const char* kSignLedger =
    "d beta/d tau = -int n mu dx with mu >= 0 (sign pinned by the dilation identity d beta/d tau = beta)";

enum class FamilyKind { translation, rotation, scaling, normal_profile };

inline const char* to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::translation: return "translation";
    case FamilyKind::rotation: return "rotation";
    case FamilyKind::scaling: return "scaling";
    case FamilyKind::normal_profile: return "normal_profile";
  }
  return "?";
}

// One-parameter family tau -> Omega_tau. All members share the curve
// parameter of the base, so d/dtau at fixed parameter is meaningful.
class DeformationFamily {
 public:
  static DeformationFamily translation(BoundaryDomain base, Vec2 v) {
    DeformationFamily f(FamilyKind::translation, std::move(base));
    f.v_ = v;
    return f;
  }
  static DeformationFamily rotation(BoundaryDomain base) {
    return DeformationFamily(FamilyKind::rotation, std::move(base));
  }
  static DeformationFamily scaling(BoundaryDomain base) {
    return DeformationFamily(FamilyKind::scaling, std::move(base));
  }
  // gamma_tau = gamma_E + tau h(x_E) N_E over an ellipse.
  static DeformationFamily normal_profile(const EllipseDomain& base, EvenProfile h) {
    DeformationFamily f(FamilyKind::normal_profile, base.boundary());
    f.ellipse_ = base;
    f.h_ = std::move(h);
    f.chart_.emplace(base.a(), base.b());
    return f;
  }

  FamilyKind kind() const { return kind_; }
  const BoundaryDomain& base() const { return base_; }
  const std::optional<EllipseDomain>& ellipse() const { return ellipse_; }

  BoundaryDomain at(double tau) const {
    if (tau == 0.0) return base_;
    switch (kind_) {
      case FamilyKind::translation: return base_.transformed(1.0, 0.0, tau * v_);
      case FamilyKind::rotation: return base_.transformed(1.0, tau);
      case FamilyKind::scaling: return base_.transformed(1.0 + tau);
      case FamilyKind::normal_profile: return PerturbedEllipseDomain(*ellipse_, tau, h_).boundary();
    }
    return base_;
  }

  // d gamma_tau / d tau at tau = 0, at curve parameter t.
  Vec2 velocity(double t) const {
    const CurveJet j = base_.jet(t);
    switch (kind_) {
      case FamilyKind::translation: return v_;
      case FamilyKind::rotation: return Vec2(-j.p.y(), j.p.x());
      case FamilyKind::scaling: return j.p;
      case FamilyKind::normal_profile: return h_(chart_->x(t)) * j.outward_normal();
    }
    return Vec2::Zero();
  }

 private:
  DeformationFamily(FamilyKind k, BoundaryDomain base) : kind_(k), base_(std::move(base)) {}

  FamilyKind kind_;
  BoundaryDomain base_;
  Vec2 v_ = Vec2::Zero();
  std::optional<EllipseDomain> ellipse_;
  EvenProfile h_;
  std::optional<EllipseLazutkinParam> chart_;
};

// n on the uniform Lazutkin grid x_m = m / M of the member domain.
struct DeformationProfile {
  std::vector<double> x, s, values;
  std::vector<double> cosine;  // coefficients of cos(2 pi j x)
  bool even = false, half_periodic = false;
};

struct SymmetryAudit {
  double scale = 0.0;           // sup |n|
  double evenness = 0.0;        // sup |n(x) - n(-x)|
  double half_period = 0.0;     // sup |n(x) - n(x + 1/2)|
  bool even(double tol = 1e-10) const { return evenness <= tol * std::max(scale, 1.0); }
  bool half_periodic(double tol = 1e-10) const { return half_period <= tol * std::max(scale, 1.0); }
};

inline SymmetryAudit symmetry_audit(const std::vector<double>& v) {
  const int M = static_cast<int>(v.size());
  SymmetryAudit a;
  for (int m = 0; m < M; ++m) {
    a.scale = std::max(a.scale, std::abs(v[m]));
    a.evenness = std::max(a.evenness, std::abs(v[m] - v[(M - m) % M]));
    if (M % 2 == 0) a.half_period = std::max(a.half_period, std::abs(v[m] - v[(m + M / 2) % M]));
  }
  return a;
}

inline SymmetryAudit symmetry_audit(const DeformationProfile& p) { return symmetry_audit(p.values); }

// n_tau = <d gamma_tau / d tau, N_tau>. Analytic at tau = 0, central
// differences at fixed curve parameter (step 1e-6) elsewhere.
inline DeformationProfile deformation_profile(const DeformationFamily& f, double tau = 0.0, int grid = 4096,
                                              int modes = 257) {
  const BoundaryDomain member = f.at(tau);
  const LazutkinChart chart(member);
  DeformationProfile p;
  p.x.resize(grid);
  p.s.resize(grid);
  p.values.resize(grid);
  std::optional<BoundaryDomain> lo, hi;
  const double h = 1e-6;
  if (tau != 0.0) {
    lo = f.at(tau - h);
    hi = f.at(tau + h);
  }
  parallel_for(grid, [&](int m) {
    const double x = static_cast<double>(m) / grid;
    const double t = chart.param_of_x(x);
    const CurveJet j = member.jet(t);
    Vec2 vel;
    if (tau == 0.0)
      vel = f.velocity(t);
    else
      vel = (hi->jet(t).p - lo->jet(t).p) / (2.0 * h);
    p.x[m] = x;
    p.s[m] = member.s_of_param(t);
    p.values[m] = vel.dot(j.outward_normal());
  });
  p.cosine = cosine_coefficients(p.values, modes);
  const SymmetryAudit a = symmetry_audit(p.values);
  p.even = a.even();
  p.half_periodic = a.half_periodic();
  return p;
}

// mu(omega, .) on the uniform grid x_m = m / M.
using DensitySource = std::function<std::vector<double>(double omega)>;

inline DensitySource ellipse_density_source(const EllipseDomain& e, int grid = 4096) {
  auto dens = std::make_shared<const EllipseDensity>(e, grid);
  return [dens](double omega) { return (*dens)(omega); };
}

inline DensitySource numeric_density_source(const BoundaryDomain& d, NumericDensityOptions opt = {}) {
  auto chart = std::make_shared<const LazutkinChart>(d);
  return [chart, opt](double omega) { return kam_density_numeric(*chart, omega, opt).mu; };
}

inline double pairing(const std::vector<double>& n, const std::vector<double>& mu) {
  if (n.size() != mu.size()) throw DomainError("profile and density grids differ");
  double s = 0.0;
  for (std::size_t m = 0; m < n.size(); ++m) s += n[m] * mu[m];
  return s / static_cast<double>(n.size());
}

// d beta_tau(omega) / d tau at tau = 0.
inline double tau_derivative_beta(const DeformationProfile& n, const std::vector<double>& mu) {
  return -pairing(n.values, mu);
}

inline double tau_derivative_beta(const DeformationFamily& f, double omega, const DensitySource& mu) {
  const std::vector<double> d = mu(omega);
  return tau_derivative_beta(deformation_profile(f, 0.0, static_cast<int>(d.size())), d);
}

// |int n mu dx| per omega.
inline std::vector<double> orthogonality_check(const DeformationFamily& f, const std::vector<double>& omegas,
                                               const DensitySource& mu) {
  std::vector<double> out;
  std::optional<DeformationProfile> p;
  for (double w : omegas) {
    const std::vector<double> d = mu(w);
    if (!p || p->values.size() != d.size()) p = deformation_profile(f, 0.0, static_cast<int>(d.size()));
    out.push_back(std::abs(pairing(p->values, d)));
  }
  return out;
}

// Central difference of beta_tau(p/q) across the family, Richardson-extrapolated.
inline double beta_tau_difference(const DeformationFamily& f, RotationNumber rot, double h = 1e-4) {
  auto beta = [&](double tau) { return beta_rational(f.at(tau), rot); };
  const double d1 = (beta(h) - beta(-h)) / (2.0 * h);
  const double d2 = (beta(0.5 * h) - beta(-0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

// ---------------------------------------------------------------------------
// End-to-end residual

struct Projection {
  EvenProfile kept;
  double rejected = 0.0;  // sup of the odd-mode coefficients dropped
};

inline Projection project_half_periodic(const EvenProfile& n) {
  std::vector<double> half;
  Projection p;
  for (int j = 0; j < n.size(); ++j) {
    if (j % 2 == 0)
      half.push_back(n.coeff(j));
    else
      p.rejected = std::max(p.rejected, std::abs(n.coeff(j)));
  }
  p.kept = EvenProfile::from_half_coeffs(half, n.alpha());
  return p;
}

struct RigidityResult {
  std::vector<double> head_residuals;
  double tail_residual_norm = 0.0;  // alpha-norm of the S part of T(n)
  double recovered_error = 0.0;     // alpha-norm of x - n, relative when n != 0
  double sigma_min = 0.0;
  double rejected_component = 0.0;
  bool stable = false;
  std::vector<double> recovered;  // half coefficients
  std::string verdict;            // trivial | excluded | inconclusive
};

// Computes T(n), solves the truncated system T x = T(n) and compares x with n.
// Verdicts: trivial (n = 0), excluded (T(n) is bounded away from 0 on an
// invertible stable truncation, so n cannot be an isospectral direction),
// inconclusive otherwise.
inline RigidityResult rigidity_residual(const TOperator& T, const OperatorTruncation& report, int N,
                                        const EvenProfile& candidate) {
  const Projection proj = project_half_periodic(candidate);
  const EvenProfile& n = proj.kept;
  RigidityResult r;
  r.rejected_component = proj.rejected;
  r.sigma_min = report.sigma_min;
  r.stable = report.kernel_dim == 0 && report.stable_under_doubling.value_or(false);

  const int q0 = T.spec.q0;
  const auto [head, tail] = T.apply(n, N);
  r.head_residuals = head;
  r.tail_residual_norm = tail.norm();

  Eigen::VectorXd rhs(N), truth = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < q0; ++i) rhs[i] = head[i];
  for (int q = q0; q < N; ++q) rhs[q] = tail.at(q);
  for (int j = 0; j < N; ++j) truth[j] = n.coeff(2 * j);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
  if (rhs.cwiseAbs().maxCoeff() > 0.0) {
    const Eigen::MatrixXd W = report.weighted();
    const Eigen::VectorXd xw = W.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(report.row_weights.cwiseProduct(rhs));
    x = xw.cwiseQuotient(report.col_weights);
  }
  r.recovered.assign(x.data(), x.data() + N);

  const Eigen::VectorXd& cw = report.col_weights;
  const double err = (x - truth).cwiseProduct(cw).cwiseAbs().maxCoeff();
  const double size = truth.cwiseProduct(cw).cwiseAbs().maxCoeff();
  r.recovered_error = size > 0.0 ? err / size : err;
  // the tail beyond N is invisible to the truncation
  for (int j = N; 2 * j < n.size(); ++j)
    if (n.coeff(2 * j) != 0.0) r.recovered_error = std::max(r.recovered_error, 1.0);

  if (size == 0.0 && proj.kept.is_zero()) {
    r.verdict = "trivial";
  } else if (!r.stable) {
    r.verdict = "inconclusive";
  } else {
    const double image = report.row_weights.cwiseProduct(rhs).norm();
    const double input = truth.cwiseProduct(cw).norm();
    r.verdict = image >= 0.5 * report.sigma_min * input ? "excluded" : "inconclusive";
  }
  return r;
}

inline RigidityResult rigidity_residual(const TPipeline& p, const EvenProfile& candidate) {
  return rigidity_residual(p.T, p.report, p.N, candidate);
}

}  // namespace brl
