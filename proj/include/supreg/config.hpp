#pragma once

// Study configs: JSON (or TOML via json_io) to typed configs and back.

#include <string>
#include <vector>

#include "supreg/experiments.hpp"
#include "supreg/json_io.hpp"

namespace supreg {

enum class StudyKind { upper, localized, lower };

inline StudyKind parse_study_kind(const std::string& s) {
  if (s == "upper") return StudyKind::upper;
  if (s == "localized") return StudyKind::localized;
  if (s == "lower") return StudyKind::lower;
  throw InputError("unknown study kind '" + s + "' (use upper, localized or lower)");
}

inline LocalizedCase parse_localized_case(const std::string& s) {
  if (s == "positive_density" || s == "a") return LocalizedCase::positive_density;
  if (s == "vanishing_point" || s == "b") return LocalizedCase::vanishing_point;
  throw InputError("unknown localized case '" + s + "'");
}

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline NamedDensity named_density(const json& j) {
  if (j.is_object() && j.contains("density")) {
    NamedDensity d{"", density_from_json(j.at("density"))};
    d.name = get_or<std::string>(j, "name", d.density.name());
    return d;
  }
  NamedDensity d{"", density_from_json(j)};
  d.name = j.is_string() ? j.get<std::string>() : d.density.name();
  return d;
}

inline HolderSpec spec_from(const json& j) {
  HolderSpec spec;
  const json& s = j.contains("spec") ? j.at("spec") : j;
  spec.s = get_or(s, "s", spec.s);
  spec.L = get_or(s, "L", spec.L);
  spec.Q = get_or(s, "Q", spec.Q);
  spec.validate();
  return spec;
}

inline void check_keys(const json& j, const std::vector<std::string>& allowed) {
  if (!j.is_object()) throw InputError("config must be an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InputError("unknown config field '" + key + "'");
}

}  // namespace detail

inline UpperBoundConfig upper_config_from_json(const json& j) {
  detail::check_keys(j, {"study", "densities", "density", "spec", "s", "L", "Q", "function", "sigma",
                         "n_list", "reps", "seed", "threshold", "D", "b", "R", "grid", "points",
                         "error_grid_points", "rate_grid_points"});
  UpperBoundConfig c;
  if (j.contains("densities")) {
    for (const auto& d : j.at("densities")) c.densities.push_back(detail::named_density(d));
  } else {
    c.densities.push_back(detail::named_density(j.contains("density") ? j.at("density") : json("uniform")));
  }
  c.spec = detail::spec_from(j);
  c.function = parse_test_function_kind(detail::get_or<std::string>(j, "function", "sine"));
  if (!j.contains("sigma")) throw InputError("config needs 'sigma'");
  c.sigma = j.at("sigma").get<double>();
  c.n_list = detail::get_or<std::vector<std::size_t>>(j, "n_list", {});
  c.reps = detail::get_or(j, "reps", c.reps);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  const json t = j.contains("threshold") ? j.at("threshold") : j;
  const double D = detail::get_or(t, "D", 2.5);
  const double b = detail::get_or(t, "b", 2.0);
  const int R = detail::get_or(t, "R", std::max(0, c.spec.r()));
  c.fit.params = ThresholdParams(c.sigma, D, b, R);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.is_string()) {
      c.fit.grid.kind = parse_grid_kind(g.get<std::string>());
    } else {
      c.fit.grid.kind = parse_grid_kind(detail::get_or<std::string>(g, "kind", "geom"));
      c.fit.grid.ratio = detail::get_or(g, "ratio", c.fit.grid.ratio);
    }
  }
  c.points = detail::get_or<std::vector<double>>(j, "points", {});
  c.error_grid_points = detail::get_or(j, "error_grid_points", c.error_grid_points);
  c.rate_grid_points = detail::get_or(j, "rate_grid_points", c.rate_grid_points);
  return c;
}

inline LocalizedConfig localized_config_from_json(const json& j) {
  detail::check_keys(j, {"study", "case", "density", "x0", "spec", "s", "L", "Q", "function", "sigma",
                         "n_list", "reps", "seed", "R", "ell", "eval_points"});
  LocalizedConfig c;
  c.kind = parse_localized_case(detail::get_or<std::string>(j, "case", "positive_density"));
  c.density = detail::named_density(j.contains("density") ? j.at("density") : json("uniform"));
  c.x0 = detail::get_or(j, "x0", c.x0);
  c.spec = detail::spec_from(j);
  c.function = parse_test_function_kind(detail::get_or<std::string>(j, "function", "sine"));
  if (!j.contains("sigma")) throw InputError("config needs 'sigma'");
  c.sigma = j.at("sigma").get<double>();
  c.n_list = detail::get_or<std::vector<std::size_t>>(j, "n_list", {});
  c.reps = detail::get_or(j, "reps", c.reps);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  c.R = detail::get_or(j, "R", c.R);
  const std::string ell = detail::get_or<std::string>(j, "ell", "log(n)^2");
  if (ell != "log(n)^2") throw InputError("only ell = \"log(n)^2\" is available from config files");
  c.eval_points = detail::get_or(j, "eval_points", c.eval_points);
  return c;
}

inline LowerBoundConfig lower_config_from_json(const json& j) {
  detail::check_keys(j, {"study", "density", "spec", "s", "L", "Q", "sigma", "n", "alpha", "center",
                         "reps", "seed", "thresholds", "fixed_design"});
  LowerBoundConfig c;
  if (j.contains("density")) c.density = detail::named_density(j.at("density"));
  c.spec = detail::spec_from(j);
  if (!j.contains("sigma")) throw InputError("config needs 'sigma'");
  c.sigma = j.at("sigma").get<double>();
  c.n = detail::get_or(j, "n", c.n);
  c.alpha = detail::get_or(j, "alpha", c.alpha);
  c.center = detail::get_or(j, "center", c.center);
  c.reps = detail::get_or(j, "reps", c.reps);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  c.thresholds = detail::get_or(j, "thresholds", c.thresholds);
  c.fixed_design = detail::get_or(j, "fixed_design", c.fixed_design);
  return c;
}

}  // namespace supreg
