#pragma once

// Small dense symmetric systems of size (R + 1) <= 6.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace supreg {

inline constexpr int kMaxDegree = 5;
inline constexpr int kMaxDim = kMaxDegree + 1;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

inline double min_eigenvalue(const Matrix& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

/// Condition number of D^{-1/2} M D^{-1/2} with D = diag(M); infinite when a
/// diagonal entry or eigenvalue is not positive.
inline double equilibrated_condition(const Matrix& m) {
  const Vector d = m.diagonal();
  if ((d.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  const Vector inv = d.array().rsqrt();
  const Matrix e = inv.asDiagonal() * m * inv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(e, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(e.rows() - 1);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

struct SymmetricSolve {
  Vector x;
  double condition = 0.0;
  bool used_eigen_fallback = false;
};

/// Solves M x = b for symmetric M: Cholesky when it succeeds, otherwise a
/// pseudo-inverse through the eigendecomposition.
inline SymmetricSolve solve_symmetric(const Matrix& m, const Vector& b) {
  SymmetricSolve out;
  out.condition = equilibrated_condition(m);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success && std::isfinite(out.condition)) {
    out.x = llt.solve(b);
    if (out.x.allFinite()) return out;
  }
  out.used_eigen_fallback = true;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const auto& vals = eig.eigenvalues();
  const double cutoff = std::abs(vals(vals.size() - 1)) * 1e-15;
  Vector coef = eig.eigenvectors().transpose() * b;
  for (Eigen::Index i = 0; i < coef.size(); ++i)
    coef(i) = std::abs(vals(i)) > cutoff ? coef(i) / vals(i) : 0.0;
  out.x = eig.eigenvectors() * coef;
  return out;
}

}  // namespace supreg
