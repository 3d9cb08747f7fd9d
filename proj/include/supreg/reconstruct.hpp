#pragma once

// Global estimator on the dyadic layout x_k = k 2^-J, 2^J <= n < 2^(J+1).

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "supreg/design.hpp"
#include "supreg/error.hpp"
#include "supreg/lpe.hpp"
#include "supreg/moments.hpp"
#include "supreg/parallel.hpp"
#include "supreg/rate.hpp"
#include "supreg/select.hpp"

namespace supreg {

struct DyadicLayout {
  int J = 0;
  std::size_t N = 1;

  DyadicLayout() = default;
  explicit DyadicLayout(std::size_t n) {
    if (n == 0) throw InputError("dyadic layout needs n >= 1");
    J = 0;
    while ((std::size_t{1} << (J + 1)) <= n) ++J;
    N = std::size_t{1} << J;
  }

  double knot(std::size_t k) const { return std::ldexp(static_cast<double>(k), -J); }

  std::vector<double> knots() const {
    std::vector<double> out(N);
    for (std::size_t k = 0; k < N; ++k) out[k] = knot(k);
    return out;
  }

  /// Nearest knot; midpoints go to the left knot.
  std::size_t cell(double x) const {
    const double t = std::ldexp(x, J);
    const double k = std::ceil(t - 0.5);
    if (k <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(k), N - 1);
  }
};

/// Compactly supported scaling function on [support_lo, support_hi].
struct ScalingFunction {
  std::function<double(double)> phi;
  double support_lo = -1.0;
  double support_hi = 1.0;
};

enum class Synthesis { nearest_knot, scaling };

inline Synthesis parse_synthesis(const std::string& name) {
  if (name == "nearest" || name == "nearest_knot") return Synthesis::nearest_knot;
  if (name == "scaling") return Synthesis::scaling;
  throw InputError("unknown synthesis backend '" + name + "'");
}

/// Quadrature from the knot values to scaling coefficients. Only the identity is
/// provided; other rules plug in here.
enum class Quadrature { identity };

inline constexpr double kMomentTolerance = 1e-8;

/// Largest m such that int phi = 1 and int t^j phi = 0 for 1 <= j <= m.
inline int vanishing_moments(const ScalingFunction& s, int max_order) {
  if (!s.phi) throw InputError("scaling function handle is empty");
  const auto moment = [&](int j) {
    return DesignDensity::integrate([&](double t) { return std::pow(t, j) * s.phi(t); },
                                    s.support_lo, s.support_hi);
  };
  if (std::abs(moment(0) - 1.0) > kMomentTolerance) return -1;
  int m = 0;
  while (m < max_order && std::abs(moment(m + 1)) <= kMomentTolerance) ++m;
  return m;
}

struct KnotFit {
  LocalFit fit;
  Interval window;
  std::size_t count = 0;
  bool empty = false;
  bool fallback_used = false;
  std::size_t candidates = 0;
};

struct EstimatorModel {
  DyadicLayout layout;
  std::vector<KnotFit> knots;
  std::vector<double> coeffs;  // 2^-J/2 fbar_k(x_k)
  Synthesis synthesis = Synthesis::nearest_knot;
  std::optional<ScalingFunction> scaling;

  double coefficient(std::size_t k) const {
    return std::pow(2.0, -0.5 * layout.J) * evaluate(knots[k].fit, layout.knot(k));
  }
};

struct FitOptions {
  ThresholdParams params;
  GridOptions grid;
  unsigned jobs = 1;
};

/// Selection plus fit at one knot.
inline KnotFit fit_knot(const Sample& sample, const MomentTree& tree, double knot,
                        const FitOptions& options, SelectionTrace* trace_out = nullptr,
                        TraceDetail detail = TraceDetail::minimal) {
  KnotFit out;
  const BandwidthGrid grid = build_grid(sample, knot, options.grid);
  out.candidates = grid.size();
  CandidateFits fits(grid, tree);
  try {
    SelectionTrace trace = select_bandwidth(grid, fits, options.params, detail);
    out.fit = fits[trace.chosen];
    out.window = trace.window;
    out.count = trace.count;
    out.fallback_used = trace.fallback_used;
    if (trace_out) *trace_out = std::move(trace);
  } catch (const EmptyGridError&) {
    GramSystem empty;
    empty.center = knot;
    empty.window = {knot, knot};
    empty.degree = options.params.R;
    empty.scaled = Matrix::Zero(empty.dim(), empty.dim());
    empty.scaled_rhs = Vector::Zero(empty.dim());
    empty.X = empty.scaled;
    empty.Y = empty.scaled_rhs;
    out.fit = fit_local(empty);
    out.window = empty.window;
    out.empty = true;
  }
  return out;
}

inline EstimatorModel fit_all_knots(const Sample& sample, const FitOptions& options) {
  if (sample.size() == 0) throw InputError("cannot fit an empty sample");
  options.params.validate();
  options.grid.validate();
  EstimatorModel model;
  model.layout = DyadicLayout(sample.size());
  const MomentTree tree(sample.xs, sample.ys, options.params.R);
  model.knots.resize(model.layout.N);
  parallel_for(model.layout.N, options.jobs, [&](std::size_t k) {
    model.knots[k] = fit_knot(sample, tree, model.layout.knot(k), options);
  });
  model.coeffs.resize(model.layout.N);
  const double norm = std::pow(2.0, -0.5 * model.layout.J);
  for (std::size_t k = 0; k < model.layout.N; ++k)
    model.coeffs[k] = norm * evaluate(model.knots[k].fit, model.layout.knot(k));
  return model;
}

/// Switches the model to scaling synthesis after checking the moment condition up to R.
inline void use_scaling_synthesis(EstimatorModel& model, ScalingFunction s, int R,
                                  Quadrature quadrature = Quadrature::identity) {
  if (quadrature != Quadrature::identity) throw InputError("only the identity quadrature is available");
  const int m = vanishing_moments(s, R);
  if (m < R) throw InputError("scaling function fails the moment condition up to degree R");
  model.scaling = std::move(s);
  model.synthesis = Synthesis::scaling;
}

inline double predict(const EstimatorModel& model, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("predict: x outside [0, 1]");
  if (model.synthesis == Synthesis::nearest_knot) return evaluate(model.knots[model.layout.cell(x)].fit, x);
  const ScalingFunction& s = *model.scaling;
  const double t = std::ldexp(x, model.layout.J);
  const double scale = std::pow(2.0, 0.5 * model.layout.J);
  const auto lo = static_cast<long long>(std::floor(t - s.support_hi));
  const auto hi = static_cast<long long>(std::ceil(t - s.support_lo));
  double acc = 0.0;
  for (long long k = std::max(0LL, lo); k <= hi && k < static_cast<long long>(model.layout.N); ++k)
    acc += model.coeffs[static_cast<std::size_t>(k)] * scale * s.phi(t - static_cast<double>(k));
  return acc;
}

/// Knots, cell midpoints and a uniform grid of `points` nodes, merged and sorted.
inline std::vector<double> error_grid(const DyadicLayout& layout, std::size_t points) {
  std::vector<double> grid;
  grid.reserve(2 * layout.N + points + 1);
  for (std::size_t k = 0; k < layout.N; ++k) {
    grid.push_back(layout.knot(k));
    grid.push_back(layout.knot(k) + std::ldexp(0.5, -layout.J));
  }
  for (std::size_t j = 0; j < points; ++j)
    grid.push_back(points == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(points - 1));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  while (!grid.empty() && grid.back() > 1.0) grid.pop_back();
  return grid;
}

struct SupError {
  double raw_sup = 0.0;
  double normalized_sup = 0.0;
  double argmax_raw = 0.0;
};

template <class F>
SupError sup_norm_error(const EstimatorModel& model, F&& f_true, const RateCurve& rates,
                        std::size_t grid_points) {
  SupError out;
  for (double x : error_grid(model.layout, grid_points)) {
    const double err = std::abs(predict(model, x) - f_true(x));
    if (err > out.raw_sup) {
      out.raw_sup = err;
      out.argmax_raw = x;
    }
    out.normalized_sup = std::max(out.normalized_sup, err / rates.rate_at(x));
  }
  return out;
}

}  // namespace supreg
