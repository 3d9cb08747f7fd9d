#pragma once

// Hölder classes H^Q(s, L), seminorm grid checks and certified test functions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "supreg/error.hpp"

namespace supreg {

struct HolderSpec {
  double s = 1.0;
  double L = 1.0;
  double Q = 1.0;

  HolderSpec() = default;
  HolderSpec(double s_, double L_, double Q_ = 1.0) : s(s_), L(L_), Q(Q_) { validate(); }

  /// The largest integer strictly smaller than s.
  int r() const { return static_cast<int>(std::ceil(s)) - 1; }
  /// Hölder exponent of the r-th derivative, in (0, 1].
  double gamma() const { return s - r(); }

  void validate() const {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("holder spec: s must be > 0");
    if (!(L > 0.0) || !std::isfinite(L)) throw InputError("holder spec: L must be > 0");
    if (!(Q > 0.0)) throw InputError("holder spec: Q must be > 0");
  }
};

/// A function together with its r-th derivative, r = spec.r().
struct TestFunction {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;  // order r
  int order = 0;

  double operator()(double x) const { return value(x); }
};

/// sup over grid pairs of |g(x) - g(y)| / |x - y|^gamma on [lo, hi] with
/// `points` equispaced nodes. For gamma = 1 adjacent pairs suffice.
inline double grid_seminorm(const std::function<double(double)>& g, double gamma, double lo,
                            double hi, std::size_t points) {
  if (points < 2) return 0.0;
  std::vector<double> xs(points), gs(points);
  for (std::size_t i = 0; i < points; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    gs[i] = g(xs[i]);
  }
  double best = 0.0;
  if (gamma >= 1.0) {
    for (std::size_t i = 0; i + 1 < points; ++i)
      best = std::max(best, std::abs(gs[i + 1] - gs[i]) / (xs[i + 1] - xs[i]));
    return best;
  }
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = i + 1; j < points; ++j)
      best = std::max(best, std::abs(gs[j] - gs[i]) / std::pow(xs[j] - xs[i], gamma));
  return best;
}

inline double grid_sup(const std::function<double(double)>& g, double lo, double hi,
                       std::size_t points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points; ++i)
    best = std::max(best, std::abs(g(lo + (hi - lo) * static_cast<double>(i) /
                                              static_cast<double>(std::max<std::size_t>(points - 1, 1)))));
  return best;
}

/// Grid version of the H^Q(s, L) membership test on [0, 1].
inline bool in_holder_class(const TestFunction& f, const HolderSpec& spec, std::size_t points,
                            double slack = 1.0) {
  const double semi = grid_seminorm(f.derivative, spec.gamma(), 0.0, 1.0, points);
  const double sup = grid_sup(f.value, 0.0, 1.0, points);
  return semi <= slack * spec.L && sup <= slack * spec.Q;
}

/// The smooth bump exp(-1/(1 - t^2)) on (-1, 1) and its derivatives.
/// d^m/dt^m bump = bump(t) * P_m(t) / (1 - t^2)^(2m) with P_0 = 1 and
/// P_{m+1} = -2t P_m + (1 - t^2)^2 P_m' + 4m t (1 - t^2) P_m.
class SmoothBump {
 public:
  explicit SmoothBump(int max_order = 0) {
    polys_.push_back({1.0});
    for (int m = 0; m < max_order; ++m) polys_.push_back(next(polys_.back(), m));
  }

  int max_order() const { return static_cast<int>(polys_.size()) - 1; }

  double operator()(double t) const { return derivative(t, 0); }

  double derivative(double t, int m) const {
    if (m < 0 || m > max_order()) throw InputError("bump derivative order out of range");
    if (!(std::abs(t) < 1.0)) return 0.0;
    const double u = 1.0 - t * t;
    const double base = std::exp(-1.0 / u);
    if (base == 0.0) return 0.0;
    double p = 0.0;
    const auto& c = polys_[static_cast<std::size_t>(m)];
    for (std::size_t i = c.size(); i-- > 0;) p = p * t + c[i];
    return base * p / std::pow(u, 2 * m);
  }

 private:
  using Poly = std::vector<double>;

  static Poly add(Poly a, const Poly& b) {
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
  }
  static Poly mul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
  }
  static Poly deriv(const Poly& a) {
    if (a.size() <= 1) return {0.0};
    Poly out(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i) out[i - 1] = static_cast<double>(i) * a[i];
    return out;
  }
  static Poly next(const Poly& p, int m) {
    const Poly u = {1.0, 0.0, -1.0};
    Poly out = mul({0.0, -2.0}, p);
    out = add(out, mul(mul(u, u), deriv(p)));
    out = add(out, mul(mul({0.0, 4.0 * m}, u), p));
    return out;
  }

  std::vector<Poly> polys_;
};

enum class TestFunctionKind { zero, sine, bump_sum, poly_plus_cusp, ramp };

inline TestFunctionKind parse_test_function_kind(const std::string& name) {
  if (name == "zero") return TestFunctionKind::zero;
  if (name == "sine") return TestFunctionKind::sine;
  if (name == "bump_sum") return TestFunctionKind::bump_sum;
  if (name == "poly_plus_cusp") return TestFunctionKind::poly_plus_cusp;
  if (name == "ramp") return TestFunctionKind::ramp;
  throw InputError("unknown test function '" + name + "'");
}

inline std::string to_string(TestFunctionKind kind) {
  switch (kind) {
    case TestFunctionKind::zero: return "zero";
    case TestFunctionKind::sine: return "sine";
    case TestFunctionKind::bump_sum: return "bump_sum";
    case TestFunctionKind::poly_plus_cusp: return "poly_plus_cusp";
    case TestFunctionKind::ramp: return "ramp";
  }
  return "unknown";
}

namespace detail {

inline double falling_factorial(double s, int r) {
  double out = 1.0;
  for (int i = 0; i < r; ++i) out *= s - i;
  return out;
}

// Scales f so its grid seminorm is `margin * L` (and its sup at most Q).
inline TestFunction certify(TestFunction f, const HolderSpec& spec, double margin,
                            std::size_t points) {
  const double semi = grid_seminorm(f.derivative, spec.gamma(), 0.0, 1.0, points);
  const double sup = grid_sup(f.value, 0.0, 1.0, points);
  double scale = semi > 0.0 ? margin * spec.L / semi : 1.0;
  if (sup * scale > spec.Q) scale = spec.Q / sup;
  auto value = f.value;
  auto derivative = f.derivative;
  f.value = [value, scale](double x) { return scale * value(x); };
  f.derivative = [derivative, scale](double x) { return scale * derivative(x); };
  return f;
}

}  // namespace detail

inline constexpr double kHolderMargin = 0.95;
inline constexpr std::size_t kCertificationPoints = 4001;

/// A test function in H^Q(s, L) with seminorm 0.95 L (sine: analytic bound;
/// other kinds: certified on a grid).
inline TestFunction make_holder_test_function(const HolderSpec& spec, TestFunctionKind kind) {
  spec.validate();
  const int r = spec.r();
  const double gamma = spec.gamma();
  TestFunction f;
  f.order = r;
  switch (kind) {
    case TestFunctionKind::zero: {
      f.name = "zero";
      f.value = [](double) { return 0.0; };
      f.derivative = [](double) { return 0.0; };
      return f;
    }
    case TestFunctionKind::sine: {
      // |g(x) - g(y)| <= min(2|g|, |g'| |x - y|) <= (2|g|)^(1-gamma) |g'|^gamma |x - y|^gamma
      constexpr double w = 2.0 * std::numbers::pi;
      double a = kHolderMargin * spec.L / (std::pow(w, r + gamma) * std::pow(2.0, 1.0 - gamma));
      a = std::min(a, spec.Q);
      f.name = "sine";
      f.value = [a](double x) { return a * std::sin(w * x); };
      f.derivative = [a, r](double x) {
        return a * std::pow(w, r) * std::sin(w * x + r * std::numbers::pi / 2.0);
      };
      return f;
    }
    case TestFunctionKind::bump_sum: {
      const SmoothBump bump(r);
      const std::vector<double> centers = {0.2, 0.5, 0.8};
      const std::vector<double> signs = {1.0, -1.0, 1.0};
      constexpr double width = 0.12;
      f.name = "bump_sum";
      f.value = [=](double x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < centers.size(); ++j)
          acc += signs[j] * bump((x - centers[j]) / width);
        return acc;
      };
      f.derivative = [=](double x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < centers.size(); ++j)
          acc += signs[j] * bump.derivative((x - centers[j]) / width, r) / std::pow(width, r);
        return acc;
      };
      return detail::certify(std::move(f), spec, kHolderMargin, kCertificationPoints);
    }
    case TestFunctionKind::poly_plus_cusp: {
      // x^(r+1)/(r+1)! has a Lipschitz r-th derivative; |x - 1/2|^s carries the roughness.
      const double s = spec.s;
      const double ff = detail::falling_factorial(s, r);
      double fact = 1.0;
      for (int i = 2; i <= r + 1; ++i) fact *= i;
      f.name = "poly_plus_cusp";
      f.value = [=](double x) { return std::pow(x, r + 1) / fact + std::pow(std::abs(x - 0.5), s); };
      f.derivative = [=](double x) {
        const double d = x - 0.5;
        const double sign = (r % 2 == 1 && d < 0.0) ? -1.0 : 1.0;
        return x + sign * ff * std::pow(std::abs(d), s - r);
      };
      return detail::certify(std::move(f), spec, kHolderMargin, kCertificationPoints);
    }
    case TestFunctionKind::ramp: {
      // (x - 1/2)^(r+1)/(r+1)!: the r-th derivative has constant slope.
      double fact = 1.0;
      for (int i = 2; i <= r + 1; ++i) fact *= i;
      f.name = "ramp";
      f.value = [=](double x) { return std::pow(x - 0.5, r + 1) / fact; };
      f.derivative = [](double x) { return x - 0.5; };
      return detail::certify(std::move(f), spec, kHolderMargin, kCertificationPoints);
    }
  }
  throw InputError("unknown test function kind");
}

}  // namespace supreg
