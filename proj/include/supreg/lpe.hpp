#pragma once

// Regularized local polynomial estimator in the basis (x - x_k)^p, p = 0..R.
//
// Internally every window is rescaled by l = max(x_k - lo, hi - x_k), that is
// phi_p = l^p psi_p with psi_p(x) = ((x - x_k) / l)^p. With D = diag(l^p) the
// raw Gram matrix is X = D S D, and the regularized system (X + eps Id) theta = Y
// becomes (S + eps D^-2) (D theta) = D^-1 Y, which stays well scaled for tiny
// windows.

#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "supreg/design.hpp"
#include "supreg/error.hpp"
#include "supreg/interval.hpp"
#include "supreg/linalg.hpp"
#include "supreg/moments.hpp"

namespace supreg {

inline constexpr double kSingularCondition = 1e15;

struct GramSystem {
  double center = 0.0;
  Interval window;
  int degree = 0;
  std::size_t count = 0;
  double scale = 1.0;   // l
  Matrix scaled;        // S
  Vector scaled_rhs;    // D^-1 Y
  Matrix X;             // raw Gram matrix
  Vector Y;             // raw right-hand side
  double lambda_min = 0.0;
  bool omega_flag = false;

  bool empty() const noexcept { return count == 0; }
  int dim() const noexcept { return degree + 1; }
  /// (n mu_n(delta))^(-1/2), the eigenvalue floor.
  double floor() const { return count == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(count)); }
};

struct LocalFit {
  Vector theta;         // coefficients of (x - x_k)^p
  Vector theta_scaled;  // D theta
  GramSystem gram;
  bool regularized = false;
  bool empty = false;
  double condition = 0.0;

  int degree() const noexcept { return gram.degree; }
  double center() const noexcept { return gram.center; }
};

inline void validate_degree(int degree) {
  if (degree < 0 || degree > kMaxDegree) throw InputError("degree R must be in [0, 5]");
}

inline double window_scale(double center, const Interval& window) {
  const double l = std::max(center - window.lo, window.hi - center);
  return l > 0.0 ? l : 1.0;
}

namespace detail {

inline void finish_gram(GramSystem& g, const MomentSums& sums) {
  const int dim = g.dim();
  g.count = sums.count;
  g.scaled = Matrix::Zero(dim, dim);
  g.scaled_rhs = Vector::Zero(dim);
  g.X = Matrix::Zero(dim, dim);
  g.Y = Vector::Zero(dim);
  if (g.count == 0) return;
  const double c = static_cast<double>(g.count);
  Vector powers(dim);
  powers(0) = 1.0;
  for (int p = 1; p < dim; ++p) powers(p) = powers(p - 1) * g.scale;
  for (int p = 0; p < dim; ++p) {
    for (int q = 0; q < dim; ++q) g.scaled(p, q) = sums.t[static_cast<std::size_t>(p + q)] / c;
    g.scaled_rhs(p) = sums.u[static_cast<std::size_t>(p)] / c;
  }
  g.X = powers.asDiagonal() * g.scaled * powers.asDiagonal();
  g.Y = powers.asDiagonal() * g.scaled_rhs;
  g.lambda_min = min_eigenvalue(g.X);
  g.omega_flag = g.lambda_min > g.floor();
}

}  // namespace detail

/// Gram system over the design points in `window`, accumulated directly.
inline GramSystem build_gram(const Sample& sample, const EmpiricalMeasure& em, double center,
                             const Interval& window, int degree) {
  validate_degree(degree);
  require_valid(window);
  GramSystem g;
  g.center = center;
  g.window = window;
  g.degree = degree;
  g.scale = window_scale(center, window);
  const auto [first, last] = em.index_range(window);
  MomentSums sums;
  sums.count = last - first;
  const double inv = 1.0 / g.scale;
  for (std::size_t i = first; i < last; ++i) {
    const double u = (sample.xs[i] - center) * inv;
    double p = 1.0;
    for (int m = 0; m <= 2 * degree; ++m) {
      sums.t[static_cast<std::size_t>(m)] += p;
      if (m <= degree) sums.u[static_cast<std::size_t>(m)] += sample.ys[i] * p;
      p *= u;
    }
  }
  detail::finish_gram(g, sums);
  return g;
}

/// Same system from a moment tree over the points [first, last).
inline GramSystem build_gram(const MomentTree& tree, std::size_t first, std::size_t last,
                             double center, const Interval& window) {
  GramSystem g;
  g.center = center;
  g.window = window;
  g.degree = tree.degree();
  g.scale = window_scale(center, window);
  detail::finish_gram(g, tree.query(first, last, center, g.scale));
  return g;
}

/// Solves the (possibly regularized) local system. Empty windows give theta = 0.
inline LocalFit fit_local(const GramSystem& gram) {
  LocalFit fit;
  fit.gram = gram;
  const int dim = gram.dim();
  fit.theta = Vector::Zero(dim);
  fit.theta_scaled = Vector::Zero(dim);
  if (gram.empty()) {
    fit.empty = true;
    return fit;
  }
  Matrix system = gram.scaled;
  if (!gram.omega_flag) {
    fit.regularized = true;
    const double eps = gram.floor();
    double inv_power = 1.0;
    const double inv_l2 = 1.0 / (gram.scale * gram.scale);
    for (int p = 0; p < dim; ++p) {
      system(p, p) += eps * inv_power;
      inv_power *= inv_l2;
    }
  }
  const SymmetricSolve solved = solve_symmetric(system, gram.scaled_rhs);
  fit.condition = solved.condition;
  if (!(solved.condition <= kSingularCondition) || !solved.x.allFinite()) {
    std::ostringstream msg;
    msg << "local system singular at x_k=" << gram.center << " over [" << gram.window.lo << ", "
        << gram.window.hi << "] (count " << gram.count << ", condition " << solved.condition << ")";
    throw SingularFitError(msg.str(), solved.condition);
  }
  fit.theta_scaled = solved.x;
  double power = 1.0;
  for (int p = 0; p < dim; ++p) {
    fit.theta(p) = solved.x(p) / power;
    power *= gram.scale;
  }
  return fit;
}

/// The matrix actually solved, in raw coordinates: X + floor * Id when regularized.
inline Matrix regularized_gram(const LocalFit& fit) {
  Matrix m = fit.gram.X;
  if (fit.regularized) m += fit.gram.floor() * Matrix::Identity(fit.gram.dim(), fit.gram.dim());
  return m;
}

/// Horner evaluation of sum theta_p (x - x_k)^p.
inline double evaluate(const LocalFit& fit, double x) {
  const double d = x - fit.center();
  double acc = 0.0;
  for (Eigen::Index p = fit.theta.size(); p-- > 0;) acc = acc * d + fit.theta(p);
  return acc;
}

/// m-th derivative of the fitted polynomial at x.
inline double evaluate_derivative(const LocalFit& fit, int m, double x) {
  if (m < 0 || m > fit.degree()) throw InputError("derivative order exceeds the degree R");
  const double d = x - fit.center();
  double acc = 0.0;
  for (Eigen::Index p = fit.theta.size(); p-- > m;) {
    double coef = fit.theta(p);
    for (int j = 0; j < m; ++j) coef *= static_cast<double>(p - j);
    acc = acc * d + coef;
  }
  return acc;
}

struct BiasVarianceDiagnostic {
  bool available = false;
  Matrix E;
  double lambda_E = 0.0;
  double bound = 0.0;
};

/// E = Lambda Xbar Lambda with Lambda = diag(|phi_p|^-1) and the bound
/// lambda(E)^-1 (L |delta|^s + sigma count^-1/2 sqrt(2 log n)).
inline BiasVarianceDiagnostic bias_variance_diagnostic(const LocalFit& fit, double s, double L,
                                                       double sigma, double n) {
  BiasVarianceDiagnostic out;
  if (fit.empty) throw InputError("bias-variance diagnostic needs a nonempty fit");
  const GramSystem& g = fit.gram;
  const int dim = g.dim();
  // Scale invariant: E_pq = (S_pq + eps l^-2p [p = q]) / sqrt(S_pp S_qq).
  Vector inv_norm(dim);
  for (int p = 0; p < dim; ++p) {
    if (!(g.scaled(p, p) > 0.0)) return out;
    inv_norm(p) = 1.0 / std::sqrt(g.scaled(p, p));
  }
  Matrix system = g.scaled;
  if (fit.regularized) {
    double inv_power = 1.0;
    for (int p = 0; p < dim; ++p) {
      system(p, p) += g.floor() * inv_power;
      inv_power /= g.scale * g.scale;
    }
  }
  out.E = inv_norm.asDiagonal() * system * inv_norm.asDiagonal();
  out.lambda_E = min_eigenvalue(out.E);
  out.available = out.lambda_E > 0.0;
  if (out.available)
    out.bound = (L * std::pow(g.window.length(), s) +
                 sigma * g.floor() * std::sqrt(2.0 * std::log(n))) /
                out.lambda_E;
  return out;
}

}  // namespace supreg
