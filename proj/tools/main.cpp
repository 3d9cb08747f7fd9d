// supreg: rate curves, sampling, adaptive fits and Monte Carlo studies.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "supreg/config.hpp"
#include "supreg/json_io.hpp"
#include "supreg/reconstruct.hpp"

namespace fs = std::filesystem;
using namespace supreg;

namespace {

struct ExitCode {
  static constexpr int ok = 0;
  static constexpr int input = 1;
  static constexpr int numerical = 2;
};

void emit(const std::optional<std::string>& path, const std::string& content) {
  if (path && *path != "-") atomic_write(*path, content);
  else std::cout << content;
}

/// Difference-based noise level: median |Y_(i+1) - Y_(i)| / (sqrt(2) * 0.6745).
/// A practical convenience, not part of the estimator's theory.
double mad_sigma(const Sample& s) {
  if (s.size() < 2) throw InputError("MAD sigma estimate needs at least two points");
  std::vector<double> d(s.size() - 1);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) d[i] = std::abs(s.ys[i + 1] - s.ys[i]);
  return stats::median(d) / (std::sqrt(2.0) * 0.6744897501960817);
}

struct Common {
  std::string density = "uniform";
  double s = 1.0;
  double L = 1.0;
  double Q = 1.0;
  std::optional<double> sigma;
  unsigned jobs = 1;
  std::optional<std::string> out;

  HolderSpec spec() const {
    HolderSpec h{s, L, Q};
    h.validate();
    return h;
  }
};

void add_spec(CLI::App* app, Common& c) {
  app->add_option("--s", c.s, "Hölder smoothness s > 0")->capture_default_str();
  app->add_option("--L", c.L, "Hölder radius L > 0")->capture_default_str();
  app->add_option("--Q", c.Q, "sup-norm bound Q")->capture_default_str();
}

struct FitFlags {
  std::string grid = "geom";
  double ratio = 2.0;
  double D = 2.5;
  double b = 2.0;
  std::optional<int> R;
};

void add_fit_flags(CLI::App* app, FitFlags& f) {
  app->add_option("--grid", f.grid, "bandwidth grid: full or geom")->capture_default_str();
  app->add_option("--geom-ratio", f.ratio, "geometric grid ratio a > 1")->capture_default_str();
  app->add_option("--D", f.D, "threshold constant, D > sqrt(2(b+1))")->capture_default_str();
  app->add_option("--b", f.b, "loss exponent b")->capture_default_str();
  app->add_option("--R", f.R, "local polynomial degree (default: largest integer below s)");
}

int run_rate(const Common& c, std::size_t n, std::size_t points) {
  const DesignDensity density = parse_density(c.density);
  const RateCurve curve = rate_curve(density, c.spec(), *c.sigma, static_cast<double>(n), uniform_grid(points), c.jobs);
  emit(c.out, rate_csv(curve));
  return ExitCode::ok;
}

int run_sample(const Common& c, std::size_t n, const std::string& function, std::uint64_t seed) {
  const DesignDensity density = parse_density(c.density);
  const TestFunction f = make_holder_test_function(c.spec(), parse_test_function_kind(function));
  const Sample sample = sample_model(density, f, *c.sigma, n, seed);
  emit(c.out, sample_csv(sample));
  return ExitCode::ok;
}

struct FitArgs {
  std::string input;
  bool sigma_mad = false;
  std::size_t points = 1025;
  std::optional<std::string> windows;
  std::optional<std::string> debug_fits;
  std::optional<std::size_t> trace_knot;
  std::optional<std::string> trace_out;
  std::string synthesis = "nearest";
};

json debug_fits_json(const EstimatorModel& model) {
  json knots = json::array();
  for (std::size_t k = 0; k < model.knots.size(); ++k) {
    const LocalFit& f = model.knots[k].fit;
    json theta = json::array();
    for (Eigen::Index i = 0; i < f.theta.size(); ++i) theta.push_back(f.theta(i));
    knots.push_back({{"k", k},
                     {"x", model.layout.knot(k)},
                     {"count", f.gram.count},
                     {"scale", f.gram.scale},
                     {"lambda_min", f.gram.lambda_min},
                     {"omega", f.gram.omega_flag},
                     {"regularized", f.regularized},
                     {"condition", f.condition},
                     {"theta", theta}});
  }
  return {{"schema", kSchemaVersion}, {"knots", knots}};
}

int run_fit(const Common& c, const FitFlags& ff, const FitArgs& a) {
  if (!c.sigma && !a.sigma_mad) throw InputError("--sigma is required (or pass --sigma-mad)");
  const HolderSpec spec = c.spec();
  Sample sample = parse_sample_csv(read_file(a.input), 0.0);
  sample.sigma = c.sigma ? *c.sigma : mad_sigma(sample);
  const int R = ff.R ? *ff.R : std::max(0, spec.r());
  if (static_cast<double>(R) + 1.0 < spec.s) throw InputError("need s <= R + 1");
  FitOptions options;
  options.params = ThresholdParams(sample.sigma, ff.D, ff.b, R);
  options.grid.kind = parse_grid_kind(ff.grid);
  options.grid.ratio = ff.ratio;
  options.jobs = c.jobs;
  EstimatorModel model = fit_all_knots(sample, options);
  if (parse_synthesis(a.synthesis) == Synthesis::scaling) {
    // Box function on [-1/2, 1/2): unit mass, first moment zero.
    ScalingFunction box{[](double t) { return t >= -0.5 && t < 0.5 ? 1.0 : 0.0; }, -0.5, 0.5};
    use_scaling_synthesis(model, box, R);
  }
  CsvWriter w({"x", "fhat"});
  for (double x : uniform_grid(a.points)) w.row(x, predict(model, x));
  emit(c.out, w.str());
  json windows = windows_json(model);
  windows["sigma"] = sample.sigma;
  windows["sigma_source"] = c.sigma ? "flag" : "mad";
  const std::string windows_path =
      a.windows ? *a.windows : (c.out && *c.out != "-" ? *c.out + ".windows.json" : "windows.json");
  atomic_write(windows_path, dump(windows));
  if (a.debug_fits) atomic_write(*a.debug_fits, dump(debug_fits_json(model)));
  if (a.trace_knot) {
    if (*a.trace_knot >= model.layout.N) throw InputError("--trace-knot is out of range");
    const MomentTree tree(sample.xs, sample.ys, R);
    SelectionTrace trace;
    fit_knot(sample, tree, model.layout.knot(*a.trace_knot), options, &trace, TraceDetail::full);
    json j = to_json(trace);
    j["schema"] = kSchemaVersion;
    j["knot"] = *a.trace_knot;
    atomic_write(a.trace_out ? *a.trace_out : "trace.json", dump(j));
  }
  return ExitCode::ok;
}

struct StudyArgs {
  std::optional<std::string> config;
  std::optional<std::string> kind;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> grid;
  std::optional<double> ratio, D, b;
  std::optional<int> R;
  std::optional<std::vector<std::size_t>> n_list;
  std::string out = "study_out";
};

int run_study(const Common& c, const StudyArgs& a, bool density_set, bool s_set, bool L_set) {
  json cfg = a.config ? load_config_file(*a.config) : json::object();
  if (a.kind) cfg["study"] = *a.kind;
  if (!cfg.contains("study")) throw InputError("study kind missing (config 'study' or --kind)");
  const StudyKind kind = parse_study_kind(cfg.at("study").get<std::string>());
  if (c.sigma) cfg["sigma"] = *c.sigma;
  if (a.reps) cfg["reps"] = *a.reps;
  if (a.seed) cfg["seed"] = *a.seed;
  if (a.n_list) cfg["n_list"] = *a.n_list;
  if (density_set) {
    cfg.erase("densities");
    cfg["density"] = c.density.find('{') != std::string::npos ? json::parse(c.density) : json(c.density);
  }
  if (s_set || L_set) {
    json spec = cfg.contains("spec") ? cfg["spec"] : json::object();
    if (s_set) spec["s"] = c.s;
    if (L_set) spec["L"] = c.L;
    cfg["spec"] = spec;
  }
  if (kind == StudyKind::upper) {
    if (a.grid || a.ratio) {
      json g = cfg.contains("grid") && cfg["grid"].is_object() ? cfg["grid"] : json::object();
      if (cfg.contains("grid") && cfg["grid"].is_string()) g["kind"] = cfg["grid"];
      if (a.grid) g["kind"] = *a.grid;
      if (a.ratio) g["ratio"] = *a.ratio;
      cfg["grid"] = g;
    }
    if (a.D || a.b || (a.R && kind == StudyKind::upper)) {
      json t = cfg.contains("threshold") ? cfg["threshold"] : json::object();
      if (a.D) t["D"] = *a.D;
      if (a.b) t["b"] = *a.b;
      if (a.R) t["R"] = *a.R;
      cfg["threshold"] = t;
    }
  } else if (a.R) {
    cfg["R"] = *a.R;
  }
  const fs::path out = a.out;
  switch (kind) {
    case StudyKind::upper: {
      UpperBoundConfig uc = upper_config_from_json(cfg);
      uc.jobs = c.jobs;
      const RiskReport r = run_upper_bound_study(uc);
      atomic_write(out / "report.json", dump(to_json(r)));
      atomic_write(out / "summary.csv", upper_summary_csv(r));
      atomic_write(out / "raw_errors.csv", upper_raw_csv(r));
      break;
    }
    case StudyKind::localized: {
      LocalizedConfig lc = localized_config_from_json(cfg);
      lc.jobs = c.jobs;
      const LocalizedReport r = run_localized_study(lc);
      if (r.any_clipped) std::cerr << "warning: localization interval clipped to [0, 1]\n";
      atomic_write(out / "report.json", dump(to_json(r)));
      atomic_write(out / "summary.csv", localized_summary_csv(r));
      atomic_write(out / "raw_errors.csv", localized_raw_csv(r));
      break;
    }
    case StudyKind::lower: {
      LowerBoundConfig lc = lower_config_from_json(cfg);
      lc.jobs = c.jobs;
      const BayesStats r = run_lower_bound_study(lc);
      atomic_write(out / "report.json", dump(to_json(r)));
      atomic_write(out / "summary.csv", lower_summary_csv(r));
      atomic_write(out / "raw_errors.csv", lower_raw_csv(r));
      break;
    }
  }
  return ExitCode::ok;
}

int run_selftest() {
  int failures = 0;
  const auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << "\n";
    failures += ok ? 0 : 1;
  };
  const HolderSpec spec{1.0, 1.0, 1.0};
  {
    const double h = solve_h(DesignDensity::uniform(), spec, 1.0, 1000.0, 0.5);
    check("uniform interior rate", std::abs(h - uniform_interior_h(spec, 1.0, 1000.0)) < 1e-9 * h);
  }
  {
    bool threw = false;
    try {
      solve_h(DesignDensity::uniform(), spec, 1e6, 10.0, 0.5);
    } catch (const NoRootError&) {
      threw = true;
    }
    check("n too small raises NoRoot", threw);
  }
  {
    const DyadicLayout layout(1000);
    check("dyadic layout 2^9 <= 1000", layout.J == 9 && layout.N == 512);
  }
  {
    const Sample s = make_sample({0.9, 0.1, 0.5}, {3.0, 1.0, 2.0}, 1.0);
    check("sample sorted by x", s.xs[0] == 0.1 && s.ys[2] == 3.0);
  }
  {
    const Sample s = sample_model(DesignDensity::uniform(), [](double) { return 2.5; }, 0.0, 256, 7);
    FitOptions o;
    o.params = ThresholdParams(0.1, 2.5, 2.0, 0);
    const EstimatorModel m = fit_all_knots(s, o);
    double worst = 0.0;
    for (std::size_t k = 0; k < m.layout.N; ++k)
      if (!m.knots[k].fit.regularized)
        worst = std::max(worst, std::abs(evaluate(m.knots[k].fit, m.layout.knot(k)) - 2.5));
    check("noiseless constant truth reproduced on unregularized windows", worst < 1e-8);
  }
  {
    const TestFunction f = make_holder_test_function(spec, TestFunctionKind::zero);
    check("zero test function", f(0.3) == 0.0);
  }
  {
    bool threw = false;
    try {
      ThresholdParams(1.0, 1.0, 2.0, 0);
    } catch (const InputError&) {
      threw = true;
    }
    check("D below sqrt(2(b+1)) rejected", threw);
  }
  return failures == 0 ? ExitCode::ok : ExitCode::numerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-adaptive sup-norm regression"};
  app.require_subcommand(1);
  Common common;

  auto* rate = app.add_subcommand("rate", "solve the rate equation on a uniform grid, CSV x,h,rate,alpha");
  std::size_t n = 1000, points = 101;
  rate->add_option("--density", common.density, "density name (uniform, cusp) or JSON spec")->capture_default_str();
  add_spec(rate, common);
  rate->add_option("--sigma", common.sigma, "noise level")->required();
  rate->add_option("--n", n, "sample size")->capture_default_str();
  rate->add_option("--grid-points", points, "number of grid points on [0, 1]")->capture_default_str();
  rate->add_option("--jobs", common.jobs, "worker threads")->capture_default_str();
  rate->add_option("--out", common.out, "output CSV (default stdout)");

  auto* sample = app.add_subcommand("sample", "draw a sample from the model, CSV x,y");
  std::string function = "sine";
  std::uint64_t seed = 1;
  sample->add_option("--density", common.density, "density name or JSON spec")->capture_default_str();
  add_spec(sample, common);
  sample->add_option("--sigma", common.sigma, "noise level")->required();
  sample->add_option("--n", n, "sample size")->capture_default_str();
  sample->add_option("--function", function, "zero, sine, bump_sum, poly_plus_cusp or ramp")->capture_default_str();
  sample->add_option("--seed", seed, "seed")->capture_default_str();
  sample->add_option("--out", common.out, "output CSV (default stdout)");

  auto* fit = app.add_subcommand("fit", "fit the adaptive estimator to a sample CSV");
  FitFlags fit_flags;
  FitArgs fit_args;
  fit->add_option("--input", fit_args.input, "sample CSV with header x,y")->required();
  add_spec(fit, common);
  fit->add_option("--sigma", common.sigma, "noise level");
  fit->add_flag("--sigma-mad", fit_args.sigma_mad,
                "estimate sigma from successive differences (heuristic, not from the theory)");
  add_fit_flags(fit, fit_flags);
  fit->add_option("--points", fit_args.points, "prediction grid size")->capture_default_str();
  fit->add_option("--synthesis", fit_args.synthesis, "nearest or scaling (box function)")->capture_default_str();
  fit->add_option("--jobs", common.jobs, "worker threads")->capture_default_str();
  fit->add_option("--out", common.out, "predictions CSV x,fhat (default stdout)");
  fit->add_option("--windows", fit_args.windows, "per-knot window JSON (default <out>.windows.json)");
  fit->add_option("--debug-fits", fit_args.debug_fits, "write per-knot Gram diagnostics JSON");
  fit->add_option("--trace-knot", fit_args.trace_knot, "dump the selection trace at knot k");
  fit->add_option("--trace-out", fit_args.trace_out, "trace JSON path (default trace.json)");

  auto* study = app.add_subcommand("study", "run a Monte Carlo study from a JSON or TOML config");
  StudyArgs study_args;
  study->add_option("--config", study_args.config, "config file (.json or .toml)");
  study->add_option("--kind", study_args.kind, "upper, localized or lower");
  auto* density_opt = study->add_option("--density", common.density, "density override");
  auto* s_opt = study->add_option("--s", common.s, "smoothness override");
  auto* L_opt = study->add_option("--L", common.L, "radius override");
  study->add_option("--sigma", common.sigma, "noise level override");
  study->add_option("--n-list", study_args.n_list, "sample sizes override");
  study->add_option("--reps", study_args.reps, "replications override");
  study->add_option("--seed", study_args.seed, "seed override");
  study->add_option("--grid", study_args.grid, "grid kind override");
  study->add_option("--geom-ratio", study_args.ratio, "geometric ratio override");
  study->add_option("--D", study_args.D, "threshold constant override");
  study->add_option("--b", study_args.b, "loss exponent override");
  study->add_option("--R", study_args.R, "degree override");
  study->add_option("--jobs", common.jobs, "worker threads")->capture_default_str();
  study->add_option("--out", study_args.out, "output directory")->capture_default_str();

  app.add_subcommand("selftest", "run the built-in sanity checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::input;
  }

  try {
    if (common.jobs == 0) throw InputError("--jobs must be >= 1");
    if (*rate) return run_rate(common, n, points);
    if (*sample) return run_sample(common, n, function, seed);
    if (*fit) return run_fit(common, fit_flags, fit_args);
    if (*study)
      return run_study(common, study_args, density_opt->count() > 0, s_opt->count() > 0, L_opt->count() > 0);
    return run_selftest();
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string echo;
    for (const auto& s : args) echo += (echo.empty() ? "" : " ") + s;
    std::cerr << "config: " << echo << "\n";
    return ExitCode::numerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::input;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::input;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::input;
  }
}
