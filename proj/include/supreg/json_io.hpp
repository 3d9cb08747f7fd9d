#pragma once

// Serialization: JSON reports (schema 1), CSV tables, atomic writes, density
// specs and a small TOML subset reader for config files.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "supreg/design.hpp"
#include "supreg/error.hpp"
#include "supreg/experiments.hpp"
#include "supreg/rate.hpp"
#include "supreg/reconstruct.hpp"
#include "supreg/select.hpp"

namespace supreg {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Files and CSV

/// Writes to a sibling temp file, then renames over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw InputError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// 17 significant digits; non-finite values print as nan / inf / -inf.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row_strings(header); }

  template <class... Cells>
  CsvWriter& row(const Cells&... cells) {
    if (sizeof...(cells) != columns_) throw InputError("csv row has the wrong number of cells");
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
    return *this;
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::size_t columns_;
  std::ostringstream out_;
};

/// Reads a two-column numeric CSV with the given header names.
inline std::pair<std::vector<double>, std::vector<double>> read_xy_csv(const std::string& text,
                                                                        const std::string& a,
                                                                        const std::string& b) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != a + "," + b) throw InputError("csv header must be '" + a + "," + b + "'");
  std::vector<double> xs, ys;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      std::size_t used = 0;
      xs.push_back(std::stod(line.substr(0, comma), &used));
      ys.push_back(std::stod(line.substr(comma + 1), &used));
    } catch (const std::exception&) {
      throw InputError("csv line " + std::to_string(lineno) + " is not two numbers");
    }
  }
  return {xs, ys};
}

inline std::string sample_csv(const Sample& s) {
  CsvWriter w({"x", "y"});
  for (std::size_t i = 0; i < s.size(); ++i) w.row(s.xs[i], s.ys[i]);
  return w.str();
}

inline Sample parse_sample_csv(const std::string& text, double sigma) {
  auto [xs, ys] = read_xy_csv(text, "x", "y");
  for (double x : xs)
    if (!(x >= 0.0 && x <= 1.0)) throw InputError("sample x values must lie in [0, 1]");
  return make_sample(std::move(xs), std::move(ys), sigma);
}

inline std::string rate_csv(const RateCurve& c) {
  CsvWriter w({"x", "h", "rate", "alpha"});
  for (std::size_t j = 0; j < c.size(); ++j) w.row(c.x[j], c.h[j], c.rate[j], c.alpha[j]);
  return w.str();
}

// ---------------------------------------------------------------------------
// Densities

inline json density_to_json(const DesignDensity& d) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, density_kind::Uniform>) return {{"kind", "uniform"}};
        else if constexpr (std::is_same_v<K, density_kind::PowerCusp>)
          return {{"kind", "power_cusp"}, {"x0", k.x0}, {"beta", k.beta}};
        else if constexpr (std::is_same_v<K, density_kind::PiecewiseLinear>)
          return {{"kind", "piecewise_linear"}, {"knots", k.knots}, {"values", k.values}};
        else return {{"kind", "custom"}};
      },
      d.kind());
}

inline DesignDensity density_from_json(const json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "uniform") return DesignDensity::uniform();
    if (name == "cusp" || name == "power_cusp") return DesignDensity::power_cusp(0.5, 1.0);
    throw InputError("unknown density name '" + name + "' (use uniform, cusp or a JSON spec)");
  }
  if (!j.is_object() || !j.contains("kind")) throw InputError("density spec needs a \"kind\" field");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "uniform") return DesignDensity::uniform();
    if (kind == "power_cusp")
      return DesignDensity::power_cusp(j.value("x0", 0.5), j.value("beta", 1.0));
    if (kind == "piecewise_linear")
      return DesignDensity::piecewise_linear(j.at("knots").get<std::vector<double>>(),
                                             j.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw InputError(std::string("bad density spec: ") + e.what());
  }
  throw InputError("unknown density kind '" + kind + "'");
}

/// Accepts a bare name or inline JSON.
inline DesignDensity parse_density(const std::string& text) {
  const auto first = text.find_first_not_of(" \t");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return density_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
      throw InputError(std::string("density JSON does not parse: ") + e.what());
    }
  }
  return density_from_json(json(text));
}

// ---------------------------------------------------------------------------
// TOML subset: [section] / [a.b] tables, key = value with strings, numbers,
// booleans, inline tables of those, and (nested) arrays. '#' starts a comment.

namespace detail {

class TomlReader {
 public:
  explicit TomlReader(const std::string& text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (skip_blank_lines()) {
      if (peek() == '[') {
        ++pos_;
        const std::vector<std::string> path = dotted_key(']');
        expect(']');
        table = &root;
        for (const auto& p : path) {
          if (!table->contains(p)) (*table)[p] = json::object();
          table = &(*table)[p];
          if (!table->is_object()) fail("table '" + p + "' redefines a value");
        }
      } else {
        const std::vector<std::string> path = dotted_key('=');
        expect('=');
        json* t = table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) t = &(*t)[path[i]];
        if (t->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*t)[path.back()] = value();
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    throw InputError("TOML line " + std::to_string(line) + ": " + what);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_space() {
    while (peek() == ' ' || peek() == '\t') ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  void skip_ws_all() {
    for (;;) {
      skip_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') ++pos_;
      else return;
    }
  }

  bool skip_blank_lines() {
    skip_ws_all();
    return pos_ < text_.size();
  }

  void end_of_line() {
    skip_space();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (pos_ < text_.size() && peek() != '\n') fail("unexpected trailing characters");
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::vector<std::string> dotted_key(char terminator) {
    std::vector<std::string> path;
    for (;;) {
      skip_space();
      std::string key;
      if (peek() == '"') {
        key = string_value();
      } else {
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')
          key += text_[pos_++];
      }
      if (key.empty()) fail("expected a key");
      path.push_back(key);
      skip_space();
      if (peek() == '.') {
        ++pos_;
        continue;
      }
      if (peek() != terminator) fail(std::string("expected '") + terminator + "' after key");
      return path;
    }
  }

  std::string string_value() {
    const char quote = text_[pos_++];
    std::string out;
    while (peek() != quote) {
      if (pos_ >= text_.size() || peek() == '\n') fail("unterminated string");
      char c = text_[pos_++];
      if (c == '\\' && quote == '"') {
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail("unsupported escape");
        }
      }
      out += c;
    }
    ++pos_;
    return out;
  }

  json value() {
    skip_space();
    const char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      for (;;) {
        skip_ws_all();
        if (peek() == ']') {
          ++pos_;
          return arr;
        }
        arr.push_back(value());
        skip_ws_all();
        if (peek() == ',') ++pos_;
        else if (peek() != ']') fail("expected ',' or ']' in array");
      }
    }
    if (c == '{') {
      ++pos_;
      json obj = json::object();
      skip_space();
      if (peek() == '}') {
        ++pos_;
        return obj;
      }
      for (;;) {
        const auto path = dotted_key('=');
        expect('=');
        json* t = &obj;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) t = &(*t)[path[i]];
        (*t)[path.back()] = value();
        skip_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect('}');
        return obj;
      }
    }
    std::string token;
    while (pos_ < text_.size() && std::string(" \t\r\n,]}#").find(peek()) == std::string::npos)
      token += text_[pos_++];
    if (token == "true") return true;
    if (token == "false") return false;
    token.erase(std::remove(token.begin(), token.end(), '_'), token.end());
    if (token.empty()) fail("expected a value");
    try {
      std::size_t used = 0;
      if (token.find_first_of(".eEn") == std::string::npos) {
        const long long v = std::stoll(token, &used, 0);
        if (used == token.size()) return v;
      }
      const double v = std::stod(token, &used);
      if (used == token.size()) return v;
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + token + "'");
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline json parse_toml(const std::string& text) { return detail::TomlReader(text).parse(); }

/// JSON by default; TOML when the file name ends in .toml.
inline json load_config_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".toml") return parse_toml(text);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const stats::LineFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"slope_se", f.slope_se}, {"points", f.points}};
}

inline json to_json(const HolderSpec& s) { return {{"s", s.s}, {"L", s.L}, {"Q", s.Q}}; }

inline json to_json(const ThresholdParams& p) {
  return {{"sigma", p.sigma}, {"D", p.D}, {"b", p.b}, {"R", p.R}};
}

inline json to_json(const GridOptions& g) { return {{"kind", to_string(g.kind)}, {"ratio", g.ratio}}; }

inline json to_json(const Interval& i) { return json::array({i.lo, i.hi}); }

inline json to_json(const SelectionTrace& t) {
  json comparisons = json::array();
  for (const auto& c : t.comparisons)
    comparisons.push_back({{"outer", c.outer},
                           {"inner", c.inner},
                           {"p", c.result.p},
                           {"statistic", c.result.statistic},
                           {"threshold", c.result.threshold},
                           {"pass", c.result.pass}});
  json status = json::array();
  for (auto s : t.status) status.push_back(static_cast<int>(s));
  return {{"chosen", t.chosen},         {"window", to_json(t.window)}, {"count", t.count},
          {"fallback_used", t.fallback_used}, {"status", status},        {"comparisons", comparisons}};
}

inline json windows_json(const EstimatorModel& m) {
  json knots = json::array();
  for (std::size_t k = 0; k < m.knots.size(); ++k) {
    const KnotFit& f = m.knots[k];
    knots.push_back({{"k", k},
                     {"x", m.layout.knot(k)},
                     {"window", to_json(f.window)},
                     {"count", f.count},
                     {"empty", f.empty},
                     {"fallback_used", f.fallback_used},
                     {"regularized", f.fit.regularized},
                     {"candidates", f.candidates}});
  }
  return {{"schema", kSchemaVersion}, {"J", m.layout.J}, {"knots", knots}};
}

inline json named_density_json(const NamedDensity& d) {
  return {{"name", d.name}, {"density", density_to_json(d.density)}};
}

inline json config_json(const UpperBoundConfig& c) {
  json dens = json::array();
  for (const auto& d : c.densities) dens.push_back(named_density_json(d));
  return {{"study", "upper"},
          {"densities", dens},
          {"spec", to_json(c.spec)},
          {"function", to_string(c.function)},
          {"sigma", c.sigma},
          {"n_list", c.n_list},
          {"reps", c.reps},
          {"seed", c.seed},
          {"threshold", to_json(c.fit.params)},
          {"grid", to_json(c.fit.grid)},
          {"points", c.points},
          {"error_grid_points", c.error_grid_points},
          {"rate_grid_points", c.rate_grid_points}};
}

inline json to_json(const RiskReport& r) {
  json dens = json::array();
  for (const auto& d : r.densities) {
    json cells = json::array();
    for (const auto& c : d.cells) {
      json reps = json::array();
      for (const auto& rep : c.reps) {
        json e = {{"seed", rep.seed},
                  {"ok", rep.ok},
                  {"raw_sup", rep.raw_sup},
                  {"normalized_sup", rep.normalized_sup},
                  {"pointwise", rep.pointwise}};
        if (!rep.ok) e["error"] = rep.error;
        reps.push_back(e);
      }
      cells.push_back({{"n", c.n},
                       {"failures", c.failures},
                       {"median_raw", c.median_raw},
                       {"q90_raw", c.q90_raw},
                       {"median_normalized", c.median_normalized},
                       {"q90_normalized", c.q90_normalized},
                       {"median_pointwise", c.median_pointwise},
                       {"rate_at_points", c.rate_at_points},
                       {"replications", reps}});
    }
    json pw = json::array();
    for (const auto& s : d.pointwise_slopes) pw.push_back(to_json(s));
    dens.push_back({{"name", d.name}, {"sup_slope", to_json(d.sup_slope)}, {"pointwise_slopes", pw}, {"cells", cells}});
  }
  return {{"schema", kSchemaVersion},
          {"config", config_json(r.config)},
          {"failures", r.failures},
          {"densities", dens}};
}

inline std::string upper_summary_csv(const RiskReport& r) {
  CsvWriter w({"density", "n", "metric", "value"});
  for (const auto& d : r.densities)
    for (const auto& c : d.cells) {
      w.row(d.name, c.n, "median_raw_sup", c.median_raw);
      w.row(d.name, c.n, "q90_raw_sup", c.q90_raw);
      w.row(d.name, c.n, "median_normalized_sup", c.median_normalized);
      w.row(d.name, c.n, "q90_normalized_sup", c.q90_normalized);
      for (std::size_t j = 0; j < c.median_pointwise.size(); ++j)
        w.row(d.name, c.n, "median_pointwise@" + fmt(r.config.points[j]), c.median_pointwise[j]);
      w.row(d.name, c.n, "failures", static_cast<double>(c.failures));
    }
  return w.str();
}

inline std::string upper_raw_csv(const RiskReport& r) {
  CsvWriter w({"density", "n", "rep", "seed", "metric", "value"});
  for (const auto& d : r.densities)
    for (const auto& c : d.cells)
      for (std::size_t i = 0; i < c.reps.size(); ++i) {
        const auto& rep = c.reps[i];
        w.row(d.name, c.n, i, rep.seed, "raw_sup", rep.raw_sup);
        w.row(d.name, c.n, i, rep.seed, "normalized_sup", rep.normalized_sup);
        for (std::size_t j = 0; j < rep.pointwise.size(); ++j)
          w.row(d.name, c.n, i, rep.seed, "pointwise@" + fmt(r.config.points[j]), rep.pointwise[j]);
      }
  return w.str();
}

inline std::string to_string(LocalizedCase c) {
  return c == LocalizedCase::positive_density ? "positive_density" : "vanishing_point";
}

inline json config_json(const LocalizedConfig& c) {
  return {{"study", "localized"},
          {"case", to_string(c.kind)},
          {"density", named_density_json(c.density)},
          {"x0", c.x0},
          {"spec", to_json(c.spec)},
          {"function", to_string(c.function)},
          {"sigma", c.sigma},
          {"n_list", c.n_list},
          {"reps", c.reps},
          {"seed", c.seed},
          {"R", c.degree()},
          {"ell", c.ell_name},
          {"eval_points", c.eval_points}};
}

inline json to_json(const LocalizedReport& r) {
  const json cfg = config_json(r.config);
  json cells = json::array();
  for (const auto& cell : r.cells) {
    json errors = json::array();
    for (std::size_t i = 0; i < cell.errors.size(); ++i)
      if (!cell.errors[i].empty()) errors.push_back({{"rep", i}, {"error", cell.errors[i]}});
    cells.push_back({{"n", cell.n},
                     {"interval", to_json(cell.layout.interval)},
                     {"clipped", cell.layout.clipped},
                     {"ell", cell.layout.ell},
                     {"knots", cell.layout.knots},
                     {"bandwidths", cell.layout.bandwidths},
                     {"median", cell.median},
                     {"q90", cell.q90},
                     {"seeds", cell.seeds},
                     {"risk", cell.risk},
                     {"errors", errors}});
  }
  return {{"schema", kSchemaVersion}, {"config", cfg}, {"clipped", r.any_clipped}, {"cells", cells}};
}

inline std::string localized_summary_csv(const LocalizedReport& r) {
  CsvWriter w({"n", "metric", "value"});
  for (const auto& c : r.cells) {
    w.row(c.n, "median_normalized_risk", c.median);
    w.row(c.n, "q90_normalized_risk", c.q90);
    w.row(c.n, "knots", static_cast<double>(c.layout.knots.size()));
  }
  return w.str();
}

inline std::string localized_raw_csv(const LocalizedReport& r) {
  CsvWriter w({"n", "rep", "seed", "normalized_risk"});
  for (const auto& c : r.cells)
    for (std::size_t i = 0; i < c.risk.size(); ++i) w.row(c.n, i, c.seeds[i], c.risk[i]);
  return w.str();
}

inline json to_json(const BumpFamily& f) {
  return {{"interval", to_json(f.interval)}, {"alpha", f.alpha}, {"beta", f.beta},
          {"a", f.a},                        {"phi_scale", f.phi_scale}, {"phi_sup", f.phi_sup},
          {"sup_h", f.sup_h},                {"Xi", f.Xi},        {"centers", f.centers},
          {"h", f.h}};
}

inline json config_json(const LowerBoundConfig& c) {
  return {{"study", "lower"},
          {"density", named_density_json(c.density)},
          {"spec", to_json(c.spec)},
          {"sigma", c.sigma},
          {"n", c.n},
          {"alpha", c.alpha},
          {"center", c.center},
          {"reps", c.reps},
          {"seed", c.seed},
          {"thresholds", c.thresholds},
          {"fixed_design", c.fixed_design}};
}

inline json to_json(const BayesStats& b) {
  const json cfg = config_json(b.config);
  json bumps = json::array();
  for (const auto& k : b.bumps)
    bumps.push_back({{"center", k.center},
                     {"h", k.h},
                     {"errors", k.errors},
                     {"expected_errors", k.expected_errors},
                     {"error_variance", k.error_variance},
                     {"z_mean", k.z_mean},
                     {"z_var", k.z_var},
                     {"z_count", k.z_count},
                     {"empty_reps", k.empty_reps},
                     {"mean_v", k.mean_v},
                     {"alt_errors", k.alt_errors}});
  json rules = json::array();
  for (const auto& r : b.rules)
    rules.push_back({{"t", r.t}, {"errors", r.errors}, {"diff_mean", r.diff_mean}, {"diff_se", r.diff_se}});
  return {{"schema", kSchemaVersion},
          {"config", cfg},
          {"family", to_json(b.family)},
          {"trials", b.trials},
          {"sign_errors", b.sign_errors},
          {"aggregate_bound", b.aggregate_bound},
          {"min_variance_mass", b.min_variance_mass},
          {"corollary_ratio", b.corollary_ratio},
          {"bumps", bumps},
          {"rules", rules}};
}

inline std::string lower_summary_csv(const BayesStats& b) {
  CsvWriter w({"n", "metric", "value"});
  w.row(b.config.n, "sign_errors", static_cast<double>(b.sign_errors));
  w.row(b.config.n, "trials", static_cast<double>(b.trials));
  w.row(b.config.n, "aggregate_bound", b.aggregate_bound);
  w.row(b.config.n, "min_variance_mass", b.min_variance_mass);
  w.row(b.config.n, "corollary_ratio", b.corollary_ratio);
  for (const auto& r : b.rules) w.row(b.config.n, "threshold_diff@" + fmt(r.t), r.diff_mean);
  return w.str();
}

inline std::string lower_raw_csv(const BayesStats& b) {
  CsvWriter w({"bump", "center", "h", "errors", "expected_errors", "z_mean", "z_var", "mean_v"});
  for (std::size_t k = 0; k < b.bumps.size(); ++k) {
    const auto& s = b.bumps[k];
    w.row(k, s.center, s.h, s.errors, s.expected_errors, s.z_mean, s.z_var, s.mean_v);
  }
  return w.str();
}

/// Dumps with NaN mapped to null (nlohmann's default) and a trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace supreg
