#pragma once

// Dense kernels used by the wave propagator and the filters: tridiagonal
// solves, symmetric eigendecomposition, reduced (truncated square-root)
// decomposition and the SPD inverse square root.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "wavebf/errors.hpp"

namespace wavebf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace linalg {

/// Solves A X = rhs for tridiagonal A given by its three diagonals (Thomas
/// algorithm). `lower` and `upper` have length n-1. Works column-wise when
/// `rhs` has several columns.
template <class Rhs>
Matrix solve_tridiagonal_block(const Vector& diag, const Vector& lower, const Vector& upper,
                               const Eigen::MatrixBase<Rhs>& rhs) {
  const Eigen::Index n = diag.size();
  if (n == 0) throw DimensionError("solve_tridiagonal: empty system");
  if (lower.size() != n - 1 || upper.size() != n - 1 || rhs.rows() != n) {
    throw DimensionError("solve_tridiagonal: inconsistent lengths (n=" + std::to_string(n) + ")");
  }
  Vector c_prime(n);
  Matrix x = rhs;
  double denom = diag(0);
  if (denom == 0.0) throw SingularityError("solve_tridiagonal: zero pivot at row 0");
  c_prime(0) = n > 1 ? upper(0) / denom : 0.0;
  x.row(0) /= denom;
  for (Eigen::Index i = 1; i < n; ++i) {
    denom = diag(i) - lower(i - 1) * c_prime(i - 1);
    if (denom == 0.0 || !std::isfinite(denom)) {
      throw SingularityError("solve_tridiagonal: zero pivot at row " + std::to_string(i));
    }
    c_prime(i) = i < n - 1 ? upper(i) / denom : 0.0;
    x.row(i) = (x.row(i) - lower(i - 1) * x.row(i - 1)) / denom;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    x.row(i) -= c_prime(i) * x.row(i + 1);
  }
  return x;
}

inline Vector solve_tridiagonal(const Vector& diag, const Vector& lower, const Vector& upper,
                                const Vector& rhs) {
  return solve_tridiagonal_block(diag, lower, upper, rhs);
}

/// Symmetric dense matrix. Construction checks the asymmetry (relative to
/// the largest entry) and then stores the exact symmetric part.
class SymMatrix {
 public:
  static constexpr double kAsymmetryTol = 1e-12;

  SymMatrix() = default;

  explicit SymMatrix(const Matrix& a, double tol = kAsymmetryTol) {
    if (a.rows() != a.cols()) throw DimensionError("SymMatrix: matrix is not square");
    const double scale = a.cwiseAbs().maxCoeff();
    if (a.size() > 0 && scale > 0.0) {
      const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
      if (asym > tol * scale) {
        throw ParameterError("SymMatrix: asymmetry " + std::to_string(asym / scale) +
                             " exceeds tolerance");
      }
    }
    entries_ = 0.5 * (a + a.transpose());
  }

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

  Eigen::Index dimension() const { return entries_.rows(); }
  const Matrix& matrix() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, matching `values`
};

namespace detail {

// First nonzero component of every column made positive.
inline void normalize_signs(Matrix& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const double tol = 1e-12 * v.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) > tol) {
        if (v(i, j) < 0.0) v.col(j) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace detail

/// Eigenvalues in descending order with orthonormal eigenvectors.
inline EigenDecomposition sym_eig(const SymMatrix& a) {
  const Eigen::Index n = a.dimension();
  if (n == 0) return {Vector(0), Matrix(0, 0)};
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("sym_eig: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  EigenDecomposition out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  detail::normalize_signs(out.vectors);
  return out;
}

/// Relative threshold under which eigenvalues of a covariance are treated as zero.
inline constexpr double kPsdClampTol = 1e-12;

/// S = [sqrt(l_1) v_1 ... sqrt(l_r) v_r] from the r largest eigenpairs.
/// Eigenvalues below kPsdClampTol * l_max (including slightly negative
/// ones) contribute zero columns, so S S^T is the best rank-r PSD
/// approximation of `a` in the Frobenius norm.
inline Matrix reduced_decomposition(const SymMatrix& a, int r) {
  const auto n = static_cast<int>(a.dimension());
  if (r < 1 || r > n) {
    throw ParameterError("reduced_decomposition: rank " + std::to_string(r) +
                         " outside [1, " + std::to_string(n) + "]");
  }
  const EigenDecomposition eig = sym_eig(a);
  const double lmax = std::max(eig.values(0), 0.0);
  Matrix s(n, r);
  for (int j = 0; j < r; ++j) {
    const double l = eig.values(j);
    const double scale = (l > kPsdClampTol * lmax && l > 0.0) ? std::sqrt(l) : 0.0;
    s.col(j) = scale * eig.vectors.col(j);
  }
  return s;
}

/// B = V diag(l^{-1/2}) V^T, so that B A B = I. Throws RankDeficiencyError
/// carrying the numerical rank when the smallest eigenvalue is not above
/// `tol * l_max`.
inline SymMatrix spd_inv_sqrt(const SymMatrix& a, double tol = 1e-12) {
  const EigenDecomposition eig = sym_eig(a);
  const Eigen::Index n = a.dimension();
  if (n == 0) return SymMatrix(Matrix(0, 0));
  const double lmax = eig.values(0);
  if (!(lmax > 0.0)) {
    throw RankDeficiencyError("spd_inv_sqrt: matrix is not positive definite", 0);
  }
  const auto rank = static_cast<int>((eig.values.array() > tol * lmax).count());
  if (rank < n) {
    throw RankDeficiencyError("spd_inv_sqrt: numerical rank " + std::to_string(rank) + " < " +
                                  std::to_string(n),
                              rank);
  }
  const Vector inv_sqrt = eig.values.array().rsqrt();
  return SymMatrix(eig.vectors * inv_sqrt.asDiagonal() * eig.vectors.transpose(), 1e-9);
}

}  // namespace linalg
}  // namespace wavebf
