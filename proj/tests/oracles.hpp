#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the code paths it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Gaussian elimination with partial pivoting on a dense copy.
inline Vector gauss_solve(Matrix a, Vector b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index piv = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    }
    a.row(k).swap(a.row(piv));
    std::swap(b(k), b(piv));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a.row(i) -= f * a.row(k);
      b(i) -= f * b(k);
    }
  }
  Vector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b(i);
    for (Eigen::Index j = i + 1; j < n; ++j) s -= a(i, j) * x(j);
    x(i) = s / a(i, i);
  }
  return x;
}

struct Eig {
  Vector values;  // descending
  Matrix vectors;
};

/// Cyclic Jacobi rotations for a symmetric matrix.
inline Eig jacobi_eig(Matrix a, int max_sweeps = 100) {
  const Eigen::Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
  Eig out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Dense tridiagonal Dirichlet Laplacian.
inline Matrix laplacian(int n, double dx) {
  Matrix l = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    l(i, i) = -2.0;
    if (i > 0) l(i, i - 1) = 1.0;
    if (i + 1 < n) l(i, i + 1) = 1.0;
  }
  return l / (dx * dx);
}

/// Dense one-step map of the theta-scheme on (behind; center) -> (center; ahead),
/// assembled from the scheme written as A p+ = B1 c + B0 b.
inline Matrix scheme_matrix(int n, double dx, double dt, double theta, double eps) {
  const Matrix l = laplacian(n, dx);
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a = id - theta * dt * dt * l;
  const Matrix b1 = 2.0 * id + dt * dt * (1.0 - 2.0 * theta) * l + eps * dt * l;
  const Matrix b0 = -id + dt * dt * theta * l - eps * dt * l;
  const Matrix a_inv = a.inverse();
  Matrix m = Matrix::Zero(2 * n, 2 * n);
  m.topRightCorner(n, n) = id;
  m.bottomLeftCorner(n, n) = a_inv * b0;
  m.bottomRightCorner(n, n) = a_inv * b1;
  return m;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n) { return random_matrix(rng, n, 1).col(0); }

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double shift = 0.5) {
  const Matrix g = random_matrix(rng, n, n);
  return g * g.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n);
}

inline Matrix random_psd(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix g = random_matrix(rng, n, n);
  return g * g.transpose();
}

}  // namespace oracle
