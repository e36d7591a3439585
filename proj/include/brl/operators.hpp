#pragma once

#include <algorithm>
#include <complex>
#include <map>
#include <cmath>
#include <numbers>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "brl/orbits.hpp"
#include "brl/parallel.hpp"
#include "brl/profile.hpp"
#include "brl/specfun.hpp"
#include "brl/spectrum.hpp"

namespace brl {

// Delta(n)_q by point sampling.
inline double delta_full(const EvenProfile& n, int q) {
  if (q < 1) throw DomainError("delta_full requires q >= 1");
  return delta_sampled([&](double x) { return n(x); }, q, n.coeff(0));
}

// Delta(n)_q as the aliasing sum over the stored coefficients.
inline double delta_aliasing(const EvenProfile& n, int q) {
  double s = 0.0;
  for (int j = q; j < n.size(); j += q) s += n.coeff(j);
  return s;
}

// Delta_s(n)_q = sum_{p >= 1} n_{2pq} for q0 <= q <= q_max.
inline AlphaSequence dirichlet_sym(const EvenProfile& n, int q0, int q_max) {
  if (!n.half_periodic()) throw DomainError("dirichlet_sym requires a half-periodic profile");
  AlphaSequence u{q0, n.alpha(), std::vector<double>(std::max(0, q_max - q0 + 1), 0.0)};
  for (int q = std::max(q0, 1); q <= q_max; ++q) u.u[q - q0] = delta_aliasing(n, 2 * q);
  return u;
}

// n_{2j} = sum_{l >= 1} mu(l) u_{l j} for j >= q0, inverse of dirichlet_sym.
inline EvenProfile moebius_op(const AlphaSequence& u) {
  const int qmax = u.q_max();
  std::vector<double> c(qmax >= 0 ? 2 * qmax + 1 : 0, 0.0);
  for (int j = std::max(u.q0, 1); j <= qmax; ++j) {
    double s = 0.0;
    for (int l = 1; l * j <= qmax; ++l) {
      const int mu = moebius_mu(l);
      if (mu != 0) s += mu * u.at(l * j);
    }
    c[2 * j] = s;
  }
  return EvenProfile(std::move(c), true, u.alpha);
}

// Finite slice of an operator from half-periodic modes {2j} to indices q.
// The conditioning report is computed on the alpha-weighted matrix
// diag(w_out) A diag(w_in)^{-1}, which represents the sup-norm spaces.
struct OperatorTruncation {
  Eigen::MatrixXd matrix;
  std::vector<int> input_modes;     // half-index j, column <-> cos(2 pi 2j x)
  std::vector<int> output_indices;  // q
  Eigen::VectorXd row_weights, col_weights;
  Eigen::VectorXd singular_values;  // descending
  double sigma_min = 0.0, sigma_max = 0.0, cond = 0.0;
  int kernel_dim = 0;
  std::optional<bool> stable_under_doubling;
  std::optional<double> sigma_min_doubled;
  std::optional<double> mr_proxy;  // ||M R|| for the restriction D = Delta_s + R

  Eigen::MatrixXd weighted() const {
    return row_weights.asDiagonal() * matrix * col_weights.cwiseInverse().asDiagonal();
  }

  void analyze(double rank_tol = 1e-12) {
    const Eigen::MatrixXd W = weighted();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(W);
    singular_values = svd.singularValues();
    const int r = static_cast<int>(std::min(W.rows(), W.cols()));
    sigma_max = r > 0 ? singular_values[0] : 0.0;
    sigma_min = r > 0 ? singular_values[r - 1] : 0.0;
    cond = sigma_min > 0 ? sigma_max / sigma_min : std::numeric_limits<double>::infinity();
    kernel_dim = static_cast<int>(W.cols()) - r;
    for (int i = 0; i < r; ++i)
      if (singular_values[i] <= rank_tol * sigma_max) ++kernel_dim;
  }
};

inline double alpha_weight(int index, double alpha) { return index <= 0 ? 1.0 : std::pow(index, alpha); }

inline void set_default_weights(OperatorTruncation& t, double alpha) {
  t.row_weights.resize(t.output_indices.size());
  t.col_weights.resize(t.input_modes.size());
  for (std::size_t i = 0; i < t.output_indices.size(); ++i) t.row_weights[i] = alpha_weight(t.output_indices[i], alpha);
  for (std::size_t j = 0; j < t.input_modes.size(); ++j) t.col_weights[j] = alpha_weight(2 * t.input_modes[j], alpha);
}

// Delta_s on modes j in [j_lo, j_hi) into rows q in [q_lo, q_hi).
inline OperatorTruncation dirichlet_matrix(int q_lo, int q_hi, int j_lo, int j_hi, double alpha = 3.5) {
  OperatorTruncation t;
  t.matrix = Eigen::MatrixXd::Zero(q_hi - q_lo, j_hi - j_lo);
  for (int q = q_lo; q < q_hi; ++q) t.output_indices.push_back(q);
  for (int j = j_lo; j < j_hi; ++j) t.input_modes.push_back(j);
  for (int q = std::max(q_lo, 1); q < q_hi; ++q)
    for (int j = std::max(j_lo, q); j < j_hi; j += q)
      if (j % q == 0) t.matrix(q - q_lo, j - j_lo) = 1.0;
  set_default_weights(t, alpha);
  t.analyze();
  return t;
}

// Moebius operator from indices q in [lo, hi) to modes j in [lo, hi).
inline OperatorTruncation moebius_matrix(int lo, int hi, double alpha = 3.5) {
  OperatorTruncation t;
  t.matrix = Eigen::MatrixXd::Zero(hi - lo, hi - lo);
  for (int j = lo; j < hi; ++j) {
    t.output_indices.push_back(j);
    t.input_modes.push_back(j);
  }
  for (int j = std::max(lo, 1); j < hi; ++j)
    for (int l = 1; l * j < hi; ++l)
      t.matrix(j - lo, l * j - lo) = moebius_mu(l);
  // input is a sequence (weight q^alpha), output a profile (weight (2j)^alpha)
  t.row_weights.resize(hi - lo);
  t.col_weights.resize(hi - lo);
  for (int j = lo; j < hi; ++j) {
    t.row_weights[j - lo] = alpha_weight(2 * j, alpha);
    t.col_weights[j - lo] = alpha_weight(j, alpha);
  }
  t.analyze();
  return t;
}

// ---------------------------------------------------------------------------
// S, D and T

// Distinguished orbits of period 2q sampled as x_k and w_k = sin phi_k / m(x_k).
class OrbitBank {
 public:
  struct Samples {
    std::vector<double> x, w;
  };

  explicit OrbitBank(LazutkinChart chart) : chart_(std::move(chart)) {}
  const LazutkinChart& chart() const { return chart_; }

  void require(std::vector<int> qs) {
    std::sort(qs.begin(), qs.end());
    qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    std::vector<int> todo;
    for (int q : qs)
      if (!s_.count(q)) todo.push_back(q);
    std::vector<Samples> out(todo.size());
    parallel_for(static_cast<int>(todo.size()), [&](int i) {
      const PeriodicOrbit o = distinguished_symmetric_orbit(chart_, 2 * todo[i]);
      Samples& sm = out[i];
      sm.x = o.x;
      sm.w.resize(o.x.size());
      for (std::size_t k = 0; k < o.x.size(); ++k) sm.w[k] = std::sin(o.angles[k]) / chart_.m_of_param(o.params[k]);
    });
    for (std::size_t i = 0; i < todo.size(); ++i) s_.emplace(todo[i], std::move(out[i]));
  }

  const Samples& at(int q) const {
    auto it = s_.find(q);
    if (it == s_.end()) throw DomainError("orbit bank has no orbit for q = " + std::to_string(q));
    return it->second;
  }

 private:
  LazutkinChart chart_;
  std::map<int, Samples> s_;
};

struct SOptions {
  int fit_points = 16;
  int fit_stride = 4;
  int min_window = 32;
};

// S(n)_q = ell_{2q}(n/m) - ell0(n) - ellb(n)/(2q)^2 on modes cos(2 pi 2j x), j < N,
// rows q0 <= q < N. The tail of column j is fitted on q = max(q0, 2j, min_window) + stride*i,
// so a column does not depend on N.
class SOperator {
 public:
  SOperator(const LazutkinChart& chart, int q0, int N, SOptions opt = {}) : bank_(chart), q0_(q0), N_(N), opt_(opt) {
    if (q0 < 1) throw DomainError("S operator requires q0 >= 1");
    if (N <= q0) throw DomainError("S operator requires N > q0");
    std::vector<int> need;
    for (int q = q0; q < N; ++q) need.push_back(q);
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < opt.fit_points; ++i) need.push_back(window_start(j) + opt.fit_stride * i);
    bank_.require(need);
    std::sort(need.begin(), need.end());
    need.erase(std::unique(need.begin(), need.end()), need.end());
    std::vector<std::vector<double>> rows(need.size());
    parallel_for(static_cast<int>(need.size()), [&](int i) { rows[i] = mode_sums(bank_.at(need[i])); });
    for (std::size_t i = 0; i < need.size(); ++i) L_.emplace(need[i], std::move(rows[i]));

    fits_.resize(N);
    parallel_for(N, [&](int j) {
      std::vector<int> qs;
      std::vector<double> data;
      for (int i = 0; i < opt_.fit_points; ++i) {
        const int q = window_start(j) + opt_.fit_stride * i;
        const int Q = 2 * q;
        const double delta = (j > 0 && (2 * j) % Q == 0) ? 1.0 : 0.0;
        qs.push_back(Q);
        data.push_back(L_.at(q)[j] - delta);
      }
      fits_[j] = fit_tail(qs, data);
    });
    S_.resize(N - q0, N);
    for (int q = q0; q < N; ++q)
      for (int j = 0; j < N; ++j) S_(q - q0, j) = L_.at(q)[j] - fits_[j].ell0 - fits_[j].ellbullet / (4.0 * q * q);
  }

  int q0() const { return q0_; }
  int N() const { return N_; }
  int window_start(int j) const { return std::max({q0_, 2 * j, opt_.min_window}); }
  const OrbitBank& bank() const { return bank_; }
  const std::vector<TailFit>& fits() const { return fits_; }
  const Eigen::MatrixXd& matrix() const { return S_; }

  // largest |full three-term fit residual| over the columns used
  double fit_residual(int modes) const {
    double r = 0.0;
    for (int j = 0; j < std::min(modes, N_); ++j)
      for (double v : fits_[j].fit_residuals) r = std::max(r, std::abs(v));
    return r;
  }

  // rows q0 <= q < q_hi, modes j < modes
  Eigen::MatrixXd block(int q_hi, int modes) const {
    if (q_hi > N_ || modes > N_) throw DomainError("S block exceeds the assembled truncation");
    return S_.topLeftCorner(q_hi - q0_, modes);
  }

  // Direct application: ell_{2q}(n/m) is summed from the profile values on the orbit.
  AlphaSequence apply(const EvenProfile& n, int q_hi = -1) const {
    if (!n.half_periodic()) throw DomainError("S operator requires a half-periodic profile");
    if (n.size() > 2 * N_ - 1) throw DomainError("profile has modes beyond the S truncation");
    if (q_hi < 0) q_hi = N_;
    double l0 = 0.0, lb = 0.0;
    for (int j = 0; 2 * j < n.size(); ++j) {
      l0 += n.coeff(2 * j) * fits_[j].ell0;
      lb += n.coeff(2 * j) * fits_[j].ellbullet;
    }
    AlphaSequence u{q0_, n.alpha(), std::vector<double>(q_hi - q0_, 0.0)};
    if (n.is_zero()) return u;
    for (int q = q0_; q < q_hi; ++q) {
      const auto& sm = bank_.at(q);
      double s = 0.0;
      for (std::size_t k = 0; k < sm.x.size(); ++k) s += sm.w[k] * n(sm.x[k]);
      u.u[q - q0_] = s - l0 - lb / (4.0 * q * q);
    }
    return u;
  }

 private:
  std::vector<double> mode_sums(const OrbitBank::Samples& sm) const {
    std::vector<double> r(N_, 0.0);
    for (std::size_t k = 0; k < sm.x.size(); ++k) {
      const double th = 4.0 * std::numbers::pi * sm.x[k];
      const std::complex<double> z(std::cos(th), std::sin(th));
      std::complex<double> zj(1.0, 0.0);
      for (int j = 0; j < N_; ++j) {
        r[j] += sm.w[k] * zj.real();
        zj *= z;
        if ((j & 31) == 31) zj /= std::abs(zj);
      }
    }
    return r;
  }

  OrbitBank bank_;
  int q0_, N_;
  SOptions opt_;
  std::map<int, std::vector<double>> L_;
  std::vector<TailFit> fits_;
  Eigen::MatrixXd S_;
};

inline OperatorTruncation make_truncation(Eigen::MatrixXd A, std::vector<int> out, std::vector<int> in, double alpha) {
  OperatorTruncation t;
  t.matrix = std::move(A);
  t.output_indices = std::move(out);
  t.input_modes = std::move(in);
  set_default_weights(t, alpha);
  return t;
}

inline constexpr double kDoublingTolerance = 0.5;

inline bool doubling_stable(double s1, double s2) {
  return s1 > 0.0 && std::abs(s2 - s1) <= kDoublingTolerance * s1;
}

// S on all modes j < N, rows q0 <= q < N.
inline OperatorTruncation s_truncation(const SOperator& S, int N, double alpha = 3.5) {
  std::vector<int> out, in;
  for (int q = S.q0(); q < N; ++q) out.push_back(q);
  for (int j = 0; j < N; ++j) in.push_back(j);
  OperatorTruncation t = make_truncation(S.block(N, N), out, in, alpha);
  t.analyze();
  return t;
}

// D = S restricted to modes j >= q0, square on [q0, N).
inline OperatorTruncation d_truncation(const SOperator& S, int N, double alpha = 3.5) {
  const int q0 = S.q0();
  std::vector<int> idx;
  for (int j = q0; j < N; ++j) idx.push_back(j);
  OperatorTruncation t = make_truncation(S.block(N, N).rightCols(N - q0), idx, idx, alpha);
  t.analyze();
  const Eigen::MatrixXd R = t.matrix - dirichlet_matrix(q0, N, q0, N, alpha).matrix;
  const Eigen::MatrixXd Rw = t.row_weights.asDiagonal() * R * t.col_weights.cwiseInverse().asDiagonal();
  t.mr_proxy = (moebius_matrix(q0, N, alpha).weighted() * Rw).cwiseAbs().rowwise().sum().maxCoeff();
  return t;
}

inline int default_truncation(int q0) { return q0 + 64; }

// Invertibility report for D at size N, re-run at 2N.
inline OperatorTruncation d_restriction_invertibility(const LazutkinChart& chart, int q0, int N = -1,
                                                     double alpha = 3.5, bool throw_unstable = true) {
  if (q0 < 2) throw DomainError("D restriction requires q0 >= 2");
  if (N < 0) N = default_truncation(q0);
  if (N - q0 < 32) throw DomainError("D restriction requires at least 32 modes");
  const SOperator S(chart, q0, 2 * N);
  OperatorTruncation t = d_truncation(S, N, alpha);
  const OperatorTruncation t2 = d_truncation(S, 2 * N, alpha);
  t.sigma_min_doubled = t2.sigma_min;
  t.stable_under_doubling = doubling_stable(t.sigma_min, t2.sigma_min);
  if (throw_unstable && !*t.stable_under_doubling)
    throw TruncationUnstable("D truncation sigma_min moves from " + std::to_string(t.sigma_min) + " to " +
                             std::to_string(t2.sigma_min) + " under doubling");
  return t;
}

struct Q0SweepEntry {
  int q0 = 0;
  double sigma_min = 0.0, sigma_min_doubled = 0.0, mr_proxy = 0.0, mr_proxy_doubled = 0.0;
  bool stable = false;
  bool accepted() const { return stable && mr_proxy < 1.0 && mr_proxy_doubled < 1.0; }
};

// First q0 in [q_lo, q_hi] whose D is stable under doubling with MR proxy < 1 at both sizes.
inline std::vector<Q0SweepEntry> q0_sweep(const LazutkinChart& chart, int q_lo, int q_hi, double alpha = 3.5) {
  std::vector<Q0SweepEntry> out;
  for (int q0 = std::max(q_lo, 2); q0 <= q_hi; ++q0) {
    const int N = default_truncation(q0);
    const SOperator S(chart, q0, 2 * N);
    const OperatorTruncation a = d_truncation(S, N, alpha), b = d_truncation(S, 2 * N, alpha);
    Q0SweepEntry e{q0, a.sigma_min, b.sigma_min, *a.mr_proxy, *b.mr_proxy, doubling_stable(a.sigma_min, b.sigma_min)};
    out.push_back(e);
    if (e.accepted()) break;
  }
  return out;
}

inline int smallest_stable_q0(const LazutkinChart& chart, int q_lo = 2, int q_hi = 8, double alpha = 3.5) {
  const auto sweep = q0_sweep(chart, q_lo, q_hi, alpha);
  if (sweep.empty() || !sweep.back().accepted())
    throw TruncationUnstable("no q0 in the sweep range gives a stable D with MR proxy below 1");
  return sweep.back().q0;
}

// [f_rows; S]; functional rows are scaled to unit max-norm in weighted coordinates.
inline OperatorTruncation stack_rows(const OperatorTruncation& S, const Eigen::MatrixXd& f_rows) {
  if (f_rows.cols() != S.matrix.cols()) throw DomainError("f rows must use the input modes of S");
  OperatorTruncation t;
  t.matrix.resize(f_rows.rows() + S.matrix.rows(), S.matrix.cols());
  t.matrix << f_rows, S.matrix;
  t.input_modes = S.input_modes;
  t.col_weights = S.col_weights;
  t.row_weights.resize(t.matrix.rows());
  for (int r = 0; r < f_rows.rows(); ++r) {
    const double mx = (f_rows.row(r).array() / S.col_weights.transpose().array()).abs().maxCoeff();
    t.row_weights[r] = mx > 0.0 ? 1.0 / mx : 1.0;
    t.output_indices.push_back(r - static_cast<int>(f_rows.rows()));  // head rows get negative indices
  }
  t.row_weights.tail(S.matrix.rows()) = S.row_weights;
  t.output_indices.insert(t.output_indices.end(), S.output_indices.begin(), S.output_indices.end());
  return t;
}

inline Eigen::VectorXd smallest_right_vector(const OperatorTruncation& t) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(t.weighted(), Eigen::ComputeFullV);
  return t.col_weights.cwiseInverse().asDiagonal() * svd.matrixV().col(t.matrix.cols() - 1);
}

inline OperatorTruncation f_completion(const OperatorTruncation& S, const Eigen::MatrixXd& f_rows,
                                       double rank_tol = 1e-12) {
  OperatorTruncation t = stack_rows(S, f_rows);
  t.analyze(rank_tol);
  if (t.kernel_dim > 0) {
    const Eigen::VectorXd v = smallest_right_vector(t);
    throw RankDeficient("completion is rank deficient (sigma_min " + std::to_string(t.sigma_min) + ")",
                        std::vector<double>(v.data(), v.data() + v.size()));
  }
  return t;
}

// Orthonormal basis (weighted coordinates) of the numerical kernel of a truncation.
inline Eigen::MatrixXd kernel_basis(const OperatorTruncation& t, double rank_tol = 1e-12) {
  const Eigen::MatrixXd W = t.weighted();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > rank_tol * sv[0]) ++rank;
  return svd.matrixV().rightCols(W.cols() - rank);
}

// ---------------------------------------------------------------------------
// Completion data and T

struct DiophantineSpec {
  double nu = 0.01;
  double sigma = 3.0;
  bool standard_form = false;  // |n w - m| >= nu n^-sigma instead of nu |m| n^-sigma
  long long n_max = 1000000;
};

struct DiophantineResult {
  bool member = false;
  double margin = 0.0;  // min over checked n of |n w - m| / bound
  long long worst_n = 0;
  long long cutoff = 0;
};

inline DiophantineResult diophantine_member(const DiophantineSpec& spec, double omega) {
  if (!(omega > 0.0 && omega < 0.5)) throw DomainError("Diophantine check needs omega in (0, 1/2)");
  if (!(spec.sigma > 2.5)) throw ConfigError("Diophantine exponent must exceed 5/2");
  if (!(spec.nu > 0.0)) throw ConfigError("Diophantine constant must be positive");
  const long double w = omega;
  DiophantineResult r;
  r.cutoff = spec.n_max;
  r.margin = std::numeric_limits<double>::infinity();
  auto check = [&](long long n) {
    const long double m = std::nearbyint(static_cast<long double>(n) * w);
    if (m == 0 && !spec.standard_form) return;  // the bound is vacuous
    const long double gap = std::abs(static_cast<long double>(n) * w - m);
    long double bound = static_cast<long double>(spec.nu) * std::pow(static_cast<long double>(n), -spec.sigma);
    if (!spec.standard_form) bound *= std::abs(m);
    const double ratio = static_cast<double>(gap / bound);
    if (ratio < r.margin) {
      r.margin = ratio;
      r.worst_n = n;
    }
  };
  const long long exhaustive = std::min<long long>(spec.n_max, 1000000);
  for (long long n = 1; n <= exhaustive; ++n) check(n);
  if (spec.n_max > exhaustive) {
    // best approximations beyond the exhaustive range are convergent denominators
    long double x = w;
    long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    for (int it = 0; it < 64; ++it) {
      const long long a = static_cast<long long>(std::floor(x));
      const long long k2 = a * k1 + k0;
      if (k2 > spec.n_max || k2 <= 0) break;
      const long long h2 = a * h1 + h0;
      if (k2 > exhaustive) check(k2);
      h0 = h1, h1 = h2, k0 = k1, k1 = k2;
      const long double frac = x - a;
      if (frac < 1e-18L) break;
      x = 1.0L / frac;
    }
  }
  r.member = r.margin >= 1.0;
  return r;
}

struct CompletionSpec {
  int q0 = 0;
  std::vector<int> J;
  double omega0 = 0.1;

  void validate() const {
    if (q0 < 0) throw ConfigError("q0 must be non-negative");
    if (static_cast<int>(J.size()) != q0) throw ConfigError("J must have q0 entries");
    for (std::size_t i = 0; i < J.size(); ++i) {
      if (J[i] < 0) throw ConfigError("J entries must be non-negative");
      if (i > 0 && J[i] <= J[i - 1]) throw ConfigError("J must be strictly increasing");
    }
    if (!(omega0 >= 0.0 && omega0 < 0.5)) throw ConfigError("omega0 must lie in [0, 1/2)");
  }
};

// Head functionals int cos(2 pi 2j x) / m(x) * d^J mu(omega0, x) dx, trapezoid on the stack grid.
inline Eigen::MatrixXd head_rows(const LazutkinChart& chart, const DensityStack& stack, const std::vector<int>& J,
                                 int modes) {
  const int M = stack.grid;
  std::vector<double> inv_m(M);
  for (int i = 0; i < M; ++i) inv_m[i] = 1.0 / chart.m(static_cast<double>(i) / M);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(J.size(), modes);
  for (std::size_t r = 0; r < J.size(); ++r) {
    if (J[r] > stack.jmax) throw DomainError("density stack is too short for the requested J");
    const auto& d = stack[J[r]];
    std::vector<double> g(M);
    for (int i = 0; i < M; ++i) g[i] = d[i] * inv_m[i] / M;
    for (int i = 0; i < M; ++i) {
      const double th = 4.0 * std::numbers::pi * i / M;
      const std::complex<double> z(std::cos(th), std::sin(th));
      std::complex<double> zj(1.0, 0.0);
      for (int j = 0; j < modes; ++j) {
        H(r, j) += g[i] * zj.real();
        zj *= z;
        if ((j & 31) == 31) zj /= std::abs(zj);
      }
    }
  }
  return H;
}

// Greedy choice of q0 derivative indices that empty ker S on the truncation.
inline std::vector<int> greedy_J(const OperatorTruncation& S, const Eigen::MatrixXd& candidates, int q0,
                                 double rank_tol = 1e-9) {
  if (q0 == 0) return {};
  const Eigen::MatrixXd V = kernel_basis(S);
  const int kdim = static_cast<int>(V.cols());
  // candidate functionals in weighted coordinates, restricted to ker S
  const Eigen::MatrixXd Fw = candidates * S.col_weights.cwiseInverse().asDiagonal();
  std::vector<int> J;
  Eigen::MatrixXd chosen(0, kdim);
  int rank = 0;
  for (int j = 0; j < candidates.rows() && rank < kdim; ++j) {
    Eigen::RowVectorXd row = Fw.row(j) * V;
    const double nrm = Fw.row(j).cwiseAbs().maxCoeff();
    if (!(nrm > 0.0)) continue;
    row /= nrm;
    Eigen::MatrixXd trial(chosen.rows() + 1, kdim);
    trial << chosen, row;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(trial);
    const auto sv = svd.singularValues();
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > rank_tol) ++r;
    if (r == rank + 1) {
      chosen = trial;
      rank = r;
      J.push_back(j);
    }
  }
  if (rank < kdim) throw SelectionExhausted("greedy selection ran out of derivative orders", kdim - rank);
  return J;
}

// Square truncation of T on modes j < N: head rows from J, tail rows from S.
struct TOperator {
  LazutkinChart chart;
  CompletionSpec spec;
  DensityStack stack;
  std::shared_ptr<const SOperator> S;
  double alpha = 3.5;

  OperatorTruncation truncation(int N) const {
    const Eigen::MatrixXd H = head_rows(chart, stack, spec.J, N);
    std::vector<int> out, in;
    for (int j = 0; j < N; ++j) in.push_back(j);
    for (int q = S->q0(); q < N; ++q) out.push_back(q);
    OperatorTruncation t = stack_rows(make_truncation(S->block(N, N), out, in, alpha), H);
    t.analyze();
    return t;
  }

  // Direct evaluation: head by quadrature of n/m against the stack, tail by S.apply.
  std::pair<std::vector<double>, AlphaSequence> apply(const EvenProfile& n, int N) const {
    std::vector<double> head(spec.J.size(), 0.0);
    const int M = stack.grid;
    for (std::size_t r = 0; r < spec.J.size(); ++r) {
      const auto& d = stack[spec.J[r]];
      double s = 0.0;
      for (int i = 0; i < M; ++i) {
        const double x = static_cast<double>(i) / M;
        s += n(x) / chart.m(x) * d[i];
      }
      head[r] = s / M;
    }
    return {head, S->apply(n, N)};
  }

};

struct TPipelineOptions {
  int q0 = -1;  // -1: first accepted entry of the q0 sweep
  double omega0 = 0.1;
  std::vector<int> J;  // empty: greedy selection
  int N = -1;
  int j_search_max = -1;  // -1: 24 for ellipses, q0 + 1 for numeric densities
  double alpha = 3.5;
  DiophantineSpec diophantine;
  NumericStackOptions numeric;
};

struct TPipeline {
  TOperator T;
  OperatorTruncation report;  // at N, with the doubled sigma_min attached
  int N = 0;
  std::vector<Q0SweepEntry> sweep;
};

// Builds T on the unit-perimeter chart of `domain`. When `exact` is given the
// density stack comes from the explicit ellipse formulas, otherwise from
// numerically reconstructed invariant curves (omega0 must be Diophantine).
inline TPipeline t_pipeline(const BoundaryDomain& domain, const EllipseDomain* exact, const TPipelineOptions& opt) {
  const LazutkinChart chart(normalize_perimeter(domain).domain);
  std::vector<Q0SweepEntry> sweep;
  int q0 = opt.q0;
  if (q0 < 0) {
    sweep = q0_sweep(chart, 2, 8, opt.alpha);
    if (sweep.empty() || !sweep.back().accepted())
      throw TruncationUnstable("no q0 in [2, 8] gives a stable D with MR proxy below 1");
    q0 = sweep.back().q0;
  }
  if (q0 < 2) throw ConfigError("q0 must be at least 2");
  const int N = opt.N > 0 ? opt.N : default_truncation(q0);
  if (N - q0 < 32) throw ConfigError("truncation must exceed q0 by at least 32");

  CompletionSpec spec{q0, opt.J, opt.omega0};
  int jmax = opt.j_search_max;
  if (!opt.J.empty()) {
    spec.validate();
    jmax = std::max(jmax, opt.J.back());
  } else if (jmax < 0) {
    jmax = exact ? 24 : q0 + 1;
  }
  if (!(opt.omega0 >= 0.0 && opt.omega0 < 0.5)) throw ConfigError("omega0 must lie in [0, 1/2)");

  DensityStack stack;
  if (exact) {
    if (exact->is_disk()) throw DiskRejected("the completed operator needs an ellipse which is not a disk");
    stack = density_omega_derivatives(*exact, opt.omega0, jmax, 4096, 1e-6, true);
  } else {
    if (!(opt.omega0 > 0.0) || !diophantine_member(opt.diophantine, opt.omega0).member)
      throw ConfigError("omega0 must be Diophantine for domains without an explicit density");
    stack = numeric_density_stack(chart, opt.omega0, jmax, opt.numeric);
  }

  auto S = std::make_shared<const SOperator>(chart, q0, 2 * N);
  if (spec.J.empty()) {
    std::vector<int> all(jmax + 1);
    for (int j = 0; j <= jmax; ++j) all[j] = j;
    spec.J = greedy_J(s_truncation(*S, N, opt.alpha), head_rows(chart, stack, all, N), q0);
  }
  spec.validate();
  TOperator T{chart, spec, std::move(stack), std::move(S), opt.alpha};
  OperatorTruncation report = T.truncation(N);
  const OperatorTruncation doubled = T.truncation(2 * N);
  report.sigma_min_doubled = doubled.sigma_min;
  report.stable_under_doubling = doubling_stable(report.sigma_min, doubled.sigma_min);
  return TPipeline{std::move(T), std::move(report), N, std::move(sweep)};
}

}  // namespace brl
