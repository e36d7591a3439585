#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "brl/boundary.hpp"
#include "brl/errors.hpp"
#include "brl/profile.hpp"

namespace brl {

using json = nlohmann::json;

// Profile JSON: {"cos":[...], "period":"half"|"full", "alpha":3.5}.
// With "half", entry i is the coefficient of cos(2 pi (2i) x).
inline EvenProfile parse_profile(const json& j) {
  if (!j.is_object() || !j.contains("cos") || !j["cos"].is_array())
    throw ConfigError("profile needs a \"cos\" array");
  std::vector<double> c;
  for (const auto& v : j["cos"]) {
    if (!v.is_number()) throw ConfigError("profile coefficients must be numbers");
    c.push_back(v.get<double>());
  }
  const std::string period = j.value("period", std::string("half"));
  const double alpha = j.value("alpha", 3.5);
  if (!(alpha > 3.0 && alpha < 4.0)) throw ConfigError("profile alpha must lie in (3, 4)");
  if (period == "half") return EvenProfile::from_half_coeffs(c, alpha);
  if (period == "full") return EvenProfile(c, false, alpha);
  throw ConfigError("profile period must be \"half\" or \"full\"");
}

inline json profile_to_json(const EvenProfile& p) {
  json j;
  std::vector<double> c;
  if (p.half_periodic()) {
    for (int i = 0; 2 * i < p.size(); ++i) c.push_back(p.coeff(2 * i));
    j["period"] = "half";
  } else {
    c = p.coeffs();
    j["period"] = "full";
  }
  j["cos"] = c;
  j["alpha"] = p.alpha();
  return j;
}

class Domain {
 public:
  static Domain ellipse(double a, double b) {
    Domain d;
    d.spec_ = {{"type", "ellipse"}, {"a", a}, {"b", b}};
    d.ellipse_.emplace(a, b);
    return d;
  }

  static Domain perturbed(double a, double b, double epsilon, const EvenProfile& h) {
    Domain d;
    d.spec_ = {{"type", "perturbed_ellipse"}, {"a", a}, {"b", b}, {"epsilon", epsilon}, {"profile", profile_to_json(h)}};
    d.perturbed_.emplace(EllipseDomain(a, b), epsilon, h);
    return d;
  }

  const BoundaryDomain& boundary() const { return ellipse_ ? ellipse_->boundary() : perturbed_->boundary(); }
  // Non-null when the explicit ellipse formulas apply.
  const EllipseDomain* exact() const { return ellipse_ ? &*ellipse_ : nullptr; }
  const EllipseDomain& base() const { return ellipse_ ? *ellipse_ : perturbed_->base(); }
  const json& spec() const { return spec_; }

 private:
  Domain() = default;
  json spec_;
  std::optional<EllipseDomain> ellipse_;
  std::optional<PerturbedEllipseDomain> perturbed_;
};

inline double positive_number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw ConfigError(std::string("domain needs a numeric \"") + key + "\"");
  const double v = j[key].get<double>();
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("domain \"") + key + "\" must be positive");
  return v;
}

inline Domain parse_domain(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw ConfigError("domain needs a \"type\"");
  const std::string type = j["type"];
  const double a = positive_number(j, "a"), b = positive_number(j, "b");
  if (b > a) throw ConfigError("domain requires a >= b");
  if (type == "ellipse") return Domain::ellipse(a, b);
  if (type == "perturbed_ellipse") {
    if (!j.contains("epsilon") || !j["epsilon"].is_number()) throw ConfigError("perturbed domain needs \"epsilon\"");
    if (!j.contains("profile")) throw ConfigError("perturbed domain needs a \"profile\"");
    return Domain::perturbed(a, b, j["epsilon"].get<double>(), parse_profile(j["profile"]));
  }
  throw ConfigError("unknown domain type \"" + type + "\"");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Domain load_domain(const std::string& path) { return parse_domain(read_json_file(path)); }
inline EvenProfile load_profile(const std::string& path) { return parse_profile(read_json_file(path)); }

}  // namespace brl
