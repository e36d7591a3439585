#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "brl/domain_io.hpp"
#include "brl/dynamics.hpp"
#include "brl/lazutkin.hpp"
#include "brl/operators.hpp"
#include "brl/orbits.hpp"
#include "brl/parallel.hpp"
#include "brl/rigidity.hpp"
#include "brl/spectrum.hpp"

namespace brl::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// FNV-1a; stable across platforms, unlike std::hash.
inline std::string config_hash(const json& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return hex64(h);
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline int log_level_from_env() {
  const char* v = std::getenv("BRL_LOG");
  if (!v || !*v) return 1;
  const std::string s(v);
  if (s == "0" || s == "1" || s == "2") return s[0] - '0';
  throw ConfigError("BRL_LOG must be 0, 1 or 2");
}

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, int level) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("brl", sink);
  log->set_pattern("[brl] %v");
  log->set_level(level == 0 ? spdlog::level::off : level == 1 ? spdlog::level::info : spdlog::level::debug);
  return log;
}

struct Settings {
  std::string domain, out, candidate;
  int threads = 0;
  std::uint64_t seed = 1;
  bool normalize = false;

  double s0 = 0.0, phi = -1.0;
  int steps = 100;
  int q_min = 2, q_max = 10;
  std::string kind = "max";
  bool all_p = false;
  double omega0 = 0.1;
  int jmax = 2, grid = 4096, stride = 1, points = 256;
  std::string what = "T", q0 = "auto", J = "auto";
  int modes = -1, j_search_max = -1;
  double alpha = 3.5;
};

class Context {
 public:
  Context(std::string sub, json config, std::string tolerances)
      : sub_(std::move(sub)), config_(std::move(config)), tol_(std::move(tolerances)) {}

  std::string csv_header(const std::vector<std::string>& extra = {}) const {
    std::ostringstream os;
    os << "# brl " << sub_ << "\n";
    os << "# config_hash: " << config_hash(config_) << "\n";
    os << "# config: " << config_.dump() << "\n";
    os << "# tolerances: " << tol_ << "\n";
    os << "# sign: " << kSignLedger << "\n";
    for (const auto& e : extra) os << "# " << e << "\n";
    return os.str();
  }

  json meta() const {
    return {{"subcommand", sub_}, {"config_hash", config_hash(config_)}, {"config", config_},
            {"tolerances", tol_}, {"sign", kSignLedger}};
  }

 private:
  std::string sub_;
  json config_;
  std::string tol_;
};

inline int parse_q0(const std::string& s) {
  if (s == "auto") return -1;
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    if (v < 2) throw ConfigError("--q0 must be at least 2");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("--q0 must be an integer or \"auto\"");
  }
}

inline std::vector<int> parse_J(const std::string& s) {
  if (s == "auto") return {};
  std::vector<int> J;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      J.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw ConfigError("--J must be \"auto\" or a comma-separated list of integers");
    }
  }
  if (J.empty()) throw ConfigError("--J is empty");
  return J;
}

inline BoundaryDomain working_boundary(const Domain& d, bool normalize, double* scale) {
  if (!normalize) {
    *scale = 1.0;
    return d.boundary();
  }
  const NormalizedDomain n = normalize_perimeter(d.boundary());
  *scale = n.scale;
  return n.domain;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns the artifact text and a one-line summary.

struct Artifact {
  std::string text, summary;
};

inline Artifact cmd_orbit(const Settings& s, const Domain& dom, const Context& ctx) {
  if (!(s.phi > 0.0 && s.phi < std::numbers::pi)) throw ConfigError("--phi must lie in (0, pi)");
  if (s.steps < 0 || s.steps > 10000000) throw ConfigError("--steps must lie in [0, 1e7]");
  double f = 1.0;
  const BoundaryDomain d = working_boundary(dom, s.normalize, &f);
  std::optional<EllipseDomain> ell;
  if (dom.exact()) ell.emplace(dom.exact()->a() * f, dom.exact()->b() * f);
  const double P = d.perimeter();
  double s0 = std::fmod(s.s0, P);
  if (s0 < 0) s0 += P;
  const OrbitSegment seg = billiard_orbit(d, {s0, s.phi}, s.steps);
  std::ostringstream os;
  os << ctx.csv_header({"perimeter: " + num(P)});
  os << "step,s,phi,x_impact,y_impact,chord_length" << (ell ? ",J" : "") << "\n";
  for (std::size_t k = 0; k < seg.points.size(); ++k) {
    const PhasePoint& p = seg.points[k];
    const Vec2 xy = d.position(p.s);
    os << k << "," << num(p.s) << "," << num(p.phi) << "," << num(xy.x()) << "," << num(xy.y()) << ","
       << num(k == 0 ? 0.0 : seg.chords[k - 1]);
    if (ell) os << "," << num(joachimsthal_invariant(*ell, p));
    os << "\n";
  }
  return {os.str(), "orbit: " + std::to_string(s.steps) + " bounces, length " + num(seg.length)};
}

inline void check_q_range(const Settings& s) {
  if (s.q_min < 2) throw ConfigError("--q-min must be at least 2");
  if (s.q_max < s.q_min) throw ConfigError("--q-max must be at least --q-min");
  if (s.q_max > 4096) throw ConfigError("--q-max must not exceed 4096");
}

inline Artifact cmd_orbits(const Settings& s, const Domain& dom, const Context& ctx) {
  check_q_range(s);
  if (s.kind != "max" && s.kind != "sym") throw ConfigError("--kind must be max or sym");
  double f = 1.0;
  const LazutkinChart chart(working_boundary(dom, s.normalize, &f));
  const int n = s.q_max - s.q_min + 1;
  std::vector<PeriodicOrbit> orbits(n);
  parallel_for(n, [&](int i) {
    const int q = s.q_min + i;
    orbits[i] = s.kind == "max" ? max_perimeter_orbit(chart, RotationNumber(1, q))
                                : distinguished_symmetric_orbit(chart, q);
  });
  std::ostringstream os;
  os << ctx.csv_header({"perimeter: " + num(chart.domain().perimeter())});
  os << "q,k,perimeter,s,x,phi\n";
  for (const auto& o : orbits)
    for (int k = 0; k < o.rotation.q; ++k)
      os << o.rotation.q << "," << k << "," << num(o.perimeter_of_orbit) << "," << num(o.impacts[k]) << ","
         << num(o.x[k]) << "," << num(o.angles[k]) << "\n";
  return {os.str(), "orbits: " + std::to_string(n) + " orbits (" + s.kind + ")"};
}

inline Artifact cmd_beta(const Settings& s, const Domain& dom, const Context& ctx) {
  check_q_range(s);
  double f = 1.0;
  const LazutkinChart chart(working_boundary(dom, s.normalize, &f));
  std::vector<RotationNumber> rots;
  for (int q = s.q_min; q <= s.q_max; ++q)
    for (int p = 1; 2 * p <= q && (s.all_p || p == 1); ++p)
      if (std::gcd(p, q) == 1) rots.emplace_back(p, q);
  std::vector<double> per(rots.size());
  parallel_for(static_cast<int>(rots.size()),
               [&](int i) { per[i] = max_perimeter_orbit(chart, rots[i]).perimeter_of_orbit; });
  std::ostringstream os;
  os << ctx.csv_header();
  os << "p,q,omega,beta,perimeter\n";
  for (std::size_t i = 0; i < rots.size(); ++i)
    os << rots[i].p << "," << rots[i].q << "," << num(rots[i].value()) << "," << num(-per[i] / rots[i].q) << ","
       << num(per[i]) << "\n";
  return {os.str(), "beta: " + std::to_string(rots.size()) + " rotation numbers"};
}

inline Artifact cmd_density(const Settings& s, const Domain& dom, const Context& ctx) {
  if (!(s.omega0 >= 0.0 && s.omega0 < 0.5)) throw ConfigError("--omega0 must lie in [0, 1/2)");
  if (s.jmax < 0 || s.jmax > 12) throw ConfigError("--jmax must lie in [0, 12]");
  if (s.stride < 1) throw ConfigError("--stride must be positive");
  DensityStack st;
  std::string source;
  if (dom.exact()) {
    if (s.grid < 64 || s.grid > (1 << 16)) throw ConfigError("--grid must lie in [64, 65536]");
    st = density_omega_derivatives(*dom.exact(), s.omega0, s.jmax, s.grid);
    source = "ellipse-exact";
  } else {
    if (!(s.omega0 > 0.0) || !diophantine_member(DiophantineSpec{}, s.omega0).member)
      throw ConfigError("--omega0 must be Diophantine for a numerically reconstructed density");
    st = numeric_density_stack(LazutkinChart(dom.boundary()), s.omega0, s.jmax);
    source = "numeric";
  }
  std::string cc;
  for (double v : st.cross_check) cc += (cc.empty() ? "" : " ") + num(v);
  std::ostringstream os;
  os << ctx.csv_header({"source: " + source, "cross_check: " + cc});
  os << "x,mu";
  for (int j = 1; j <= s.jmax; ++j) os << ",dmu_" << j;
  os << "\n";
  for (int m = 0; m < st.grid; m += s.stride) {
    os << num(static_cast<double>(m) / st.grid);
    for (int j = 0; j <= s.jmax; ++j) os << "," << num(st[j][m]);
    os << "\n";
  }
  return {os.str(), "density: " + source + " stack to order " + std::to_string(s.jmax)};
}

inline Artifact cmd_lazutkin(const Settings& s, const Domain& dom, const Context& ctx) {
  if (s.points < 2 || s.points > (1 << 20)) throw ConfigError("--points must lie in [2, 2^20]");
  const NormalizedDomain nd = normalize_perimeter(dom.boundary());
  const LazutkinChart chart(nd.domain);
  std::vector<std::string> rows(s.points);
  parallel_for(s.points, [&](int i) {
    const double sv = static_cast<double>(i) / s.points;
    const double t = nd.domain.param_of_s(sv);
    const double x = chart.x_of_param(t);
    rows[i] = num(sv) + "," + num(x) + "," + num(1.0 / nd.domain.jet(t).curvature()) + "," +
              num(chart.m_of_param(t)) + "\n";
  });
  std::ostringstream os;
  os << ctx.csv_header({"C: " + num(chart.C()), "scale: " + num(nd.scale)});
  os << "s,x,rho,m\n";
  for (const auto& r : rows) os << r;
  return {os.str(), "lazutkin: C = " + num(chart.C())};
}

inline json report_json(const OperatorTruncation& t) {
  json j;
  j["sigma_min"] = t.sigma_min;
  j["sigma_max"] = t.sigma_max;
  j["cond"] = t.cond;
  j["stable_under_doubling"] = t.stable_under_doubling.value_or(false);
  j["kernel_dim"] = t.kernel_dim;
  if (t.sigma_min_doubled) j["sigma_min_doubled"] = *t.sigma_min_doubled;
  if (t.mr_proxy) j["mr_proxy"] = *t.mr_proxy;
  return j;
}

inline void attach_doubling(OperatorTruncation& t, const OperatorTruncation& t2) {
  t.sigma_min_doubled = t2.sigma_min;
  t.stable_under_doubling = doubling_stable(t.sigma_min, t2.sigma_min);
}

inline TPipelineOptions pipeline_options(const Settings& s) {
  TPipelineOptions o;
  o.q0 = parse_q0(s.q0);
  o.omega0 = s.omega0;
  o.J = parse_J(s.J);
  o.N = s.modes;
  o.j_search_max = s.j_search_max;
  o.alpha = s.alpha;
  if (!o.J.empty() && o.q0 < 0) o.q0 = static_cast<int>(o.J.size());
  if (!o.J.empty() && static_cast<int>(o.J.size()) != o.q0) throw ConfigError("--J must have q0 entries");
  return o;
}

inline void check_alpha(const Settings& s) {
  if (!(s.alpha > 3.0 && s.alpha < 4.0)) throw ConfigError("--alpha must lie in (3, 4)");
}

inline Artifact cmd_operator(const Settings& s, const std::optional<Domain>& dom, const Context& ctx) {
  check_alpha(s);
  json out;
  out["what"] = s.what;
  if (s.what == "dirichlet" || s.what == "moebius") {
    const int q0 = s.q0 == "auto" ? 2 : parse_q0(s.q0);
    const int N = s.modes > 0 ? s.modes : default_truncation(q0);
    if (N <= q0) throw ConfigError("--modes must exceed q0");
    auto make = [&](int n) {
      return s.what == "dirichlet" ? dirichlet_matrix(q0, n, q0, n, s.alpha) : moebius_matrix(q0, n, s.alpha);
    };
    OperatorTruncation t = make(N);
    attach_doubling(t, make(2 * N));
    out.update(report_json(t));
    out["q0"] = q0;
    out["N"] = N;
  } else if (s.what == "S" || s.what == "D" || s.what == "T") {
    if (!dom) throw ConfigError("--what " + s.what + " needs --domain");
    if (s.what == "T") {
      const TPipeline p = t_pipeline(dom->boundary(), dom->exact(), pipeline_options(s));
      out.update(report_json(p.report));
      out["q0"] = p.T.spec.q0;
      out["N"] = p.N;
      out["J"] = p.T.spec.J;
      out["omega0"] = p.T.spec.omega0;
    } else {
      const LazutkinChart chart(normalize_perimeter(dom->boundary()).domain);
      int q0 = parse_q0(s.q0);
      if (q0 < 0) q0 = smallest_stable_q0(chart, 2, 8, s.alpha);
      const int N = s.modes > 0 ? s.modes : default_truncation(q0);
      if (N - q0 < 32) throw ConfigError("--modes must exceed q0 by at least 32");
      const SOperator S(chart, q0, 2 * N);
      OperatorTruncation t = s.what == "S" ? s_truncation(S, N, s.alpha) : d_truncation(S, N, s.alpha);
      attach_doubling(t, s.what == "S" ? s_truncation(S, 2 * N, s.alpha) : d_truncation(S, 2 * N, s.alpha));
      out.update(report_json(t));
      out["q0"] = q0;
      out["N"] = N;
      out["fit_residual"] = S.fit_residual(N);
    }
  } else {
    throw ConfigError("--what must be one of dirichlet, moebius, S, D, T");
  }
  out["meta"] = ctx.meta();
  const std::string summary = "operator " + s.what + ": sigma_min " + num(out["sigma_min"].get<double>()) +
                              ", kernel_dim " + std::to_string(out["kernel_dim"].get<int>());
  return {out.dump(2) + "\n", summary};
}

inline Artifact cmd_rigidity(const Settings& s, const Domain& dom, const Context& ctx) {
  check_alpha(s);
  if (s.candidate.empty()) throw ConfigError("rigidity needs --candidate");
  const EvenProfile cand = load_profile(s.candidate);
  const TPipeline p = t_pipeline(dom.boundary(), dom.exact(), pipeline_options(s));
  const RigidityResult r = rigidity_residual(p, cand);
  json out;
  out["head_residuals"] = r.head_residuals;
  out["tail_residual_norm"] = r.tail_residual_norm;
  out["recovered_error"] = r.recovered_error;
  out["sigma_min"] = r.sigma_min;
  out["verdict"] = r.verdict;
  out["rejected_component"] = r.rejected_component;
  out["stable_under_doubling"] = r.stable;
  out["q0"] = p.T.spec.q0;
  out["J"] = p.T.spec.J;
  out["N"] = p.N;
  out["meta"] = ctx.meta();
  return {out.dump(2) + "\n", "rigidity: " + r.verdict + ", recovered error " + num(r.recovered_error)};
}

// ---------------------------------------------------------------------------

inline std::string tolerances_for(const std::string& sub) {
  if (sub == "orbit") return "impact root 1e-12 (parameter)";
  if (sub == "orbits" || sub == "beta") return "orbit criticality 1e-9, ascent 1e-12";
  if (sub == "density") return "derivative cross-check 1e-6 (exact), 1e-2 (numeric)";
  if (sub == "lazutkin") return "chart inversion 1e-10";
  if (sub == "operator" || sub == "rigidity")
    return "rank 1e-12 sigma_max, doubling change 50%, greedy rank 1e-9";
  return "";
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Birkhoff billiards and length-spectral rigidity toolkit", "brl"};
  app.require_subcommand(1, 1);
  app.add_option("--threads", s.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", s.seed, "random seed");
  app.add_option("-o,--out", s.out, "output file (default stdout)");

  auto domain_opt = [&](CLI::App* c, bool required) {
    auto* o = c->add_option("--domain", s.domain, "domain JSON file");
    if (required) o->required();
  };
  auto* orbit = app.add_subcommand("orbit", "iterate the billiard map");
  domain_opt(orbit, true);
  orbit->add_option("--s", s.s0, "start arc length");
  orbit->add_option("--phi", s.phi, "start angle in (0, pi)")->required();
  orbit->add_option("--steps", s.steps, "bounces");
  orbit->add_flag("--normalize", s.normalize, "rescale to unit perimeter");

  auto* orbits = app.add_subcommand("orbits", "periodic orbits of rotation 1/q");
  domain_opt(orbits, true);
  orbits->add_option("--q-min", s.q_min);
  orbits->add_option("--q-max", s.q_max);
  orbits->add_option("--kind", s.kind, "max or sym");
  orbits->add_flag("--normalize", s.normalize);

  auto* beta = app.add_subcommand("beta", "beta at rational rotation numbers");
  domain_opt(beta, true);
  s.q_max = 10;
  beta->add_option("--q-min", s.q_min);
  beta->add_option("--q-max", s.q_max);
  beta->add_flag("--all-p", s.all_p, "all p/q <= 1/2, not only 1/q");
  beta->add_flag("--normalize", s.normalize);

  auto* density = app.add_subcommand("density", "KAM density and its omega-derivatives");
  domain_opt(density, true);
  density->add_option("--omega0", s.omega0)->required();
  density->add_option("--jmax", s.jmax);
  density->add_option("--grid", s.grid);
  density->add_option("--stride", s.stride, "emit every stride-th grid point");

  auto* laz = app.add_subcommand("lazutkin", "Lazutkin chart of the unit-perimeter domain");
  domain_opt(laz, true);
  laz->add_option("--points", s.points);

  auto* op = app.add_subcommand("operator", "truncated operator report");
  domain_opt(op, false);
  op->add_option("--what", s.what, "dirichlet, moebius, S, D or T");
  op->add_option("--q0", s.q0, "integer or auto");
  op->add_option("--modes", s.modes, "truncation size N");
  op->add_option("--omega0", s.omega0);
  op->add_option("--J", s.J, "auto or j0,j1,...");
  op->add_option("--alpha", s.alpha);
  op->add_option("--j-search-max", s.j_search_max, "largest derivative order tried by the greedy choice of J");

  auto* rig = app.add_subcommand("rigidity", "rigidity residual of a candidate profile");
  domain_opt(rig, true);
  rig->add_option("--q0", s.q0);
  rig->add_option("--omega0", s.omega0);
  rig->add_option("--J", s.J);
  rig->add_option("--modes", s.modes);
  rig->add_option("--alpha", s.alpha);
  rig->add_option("--j-search-max", s.j_search_max);
  rig->add_option("--candidate", s.candidate, "profile JSON file")->required();

  std::shared_ptr<spdlog::logger> log;
  try {
    log = make_logger(err, log_level_from_env());
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    set_threads(s.threads);
    std::optional<Domain> dom;
    if (!s.domain.empty()) dom = load_domain(s.domain);

    json config;
    config["subcommand"] = name;
    config["seed"] = s.seed;
    if (dom) config["domain"] = dom->spec();
    for (const CLI::Option* o : sub->get_options()) {
      if (o->get_name() == "--help" || o->get_name() == "--domain" || o->get_name() == "--candidate") continue;
      if (o->count() > 0) config["options"][o->get_name()] = o->as<std::string>();
    }
    if (!s.candidate.empty()) config["candidate"] = profile_to_json(load_profile(s.candidate));
    const Context ctx(name, config, tolerances_for(name));
    log->debug("config {}", config.dump());

    Artifact a;
    if (name == "orbit") a = cmd_orbit(s, *dom, ctx);
    else if (name == "orbits") a = cmd_orbits(s, *dom, ctx);
    else if (name == "beta") a = cmd_beta(s, *dom, ctx);
    else if (name == "density") a = cmd_density(s, *dom, ctx);
    else if (name == "lazutkin") a = cmd_lazutkin(s, *dom, ctx);
    else if (name == "operator") a = cmd_operator(s, dom, ctx);
    else a = cmd_rigidity(s, *dom, ctx);

    if (s.out.empty()) {
      out << a.text;
    } else {
      std::ofstream f(s.out, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + s.out);
      f << a.text;
    }
    log->info("{}", a.summary);
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace brl::cli
