#pragma once

// Discrete Kalman filter and reduced-rank SEEK filter over the stacked wave
// state x = (p_prev; p_curr). The unknown model-error covariance Q is
// replaced by multiplicative inflation (1 + gamma).

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>

#include "wavebf/errors.hpp"
#include "wavebf/linalg.hpp"
#include "wavebf/observation.hpp"
#include "wavebf/wave_core.hpp"

namespace wavebf {

enum class ObservedQuantity { position, velocity };

/// Linear map C from a stacked state of length 2n to the m sensors. Either
/// p_curr at the sensors, or the discrete velocity (p_curr - p_prev)/dt.
class ObservationOperator {
 public:
  ObservationOperator(SensorArray sensors, int n,
                      ObservedQuantity quantity = ObservedQuantity::position,
                      double delta_t = 1.0)
      : sensors_(std::move(sensors)), n_(n), quantity_(quantity), delta_t_(delta_t) {
    for (int i : sensors_.indices) {
      if (i < 0 || i >= n_) throw DimensionError("ObservationOperator: sensor index out of range");
    }
    if (quantity_ == ObservedQuantity::velocity && !(delta_t_ > 0.0)) {
      throw ParameterError("ObservationOperator: delta_t must be positive");
    }
  }

  int rows() const { return sensors_.count(); }
  int state_dim() const { return 2 * n_; }
  const SensorArray& sensors() const { return sensors_; }
  ObservedQuantity quantity() const { return quantity_; }

  /// Applies C to every column of a (2n x k) matrix.
  Matrix apply(const Matrix& x) const {
    if (x.rows() != state_dim()) throw DimensionError("ObservationOperator: state length mismatch");
    Matrix out(rows(), x.cols());
    for (int j = 0; j < rows(); ++j) {
      const int i = sensors_.indices[static_cast<std::size_t>(j)];
      if (quantity_ == ObservedQuantity::position) {
        out.row(j) = x.row(n_ + i);
      } else {
        out.row(j) = (x.row(n_ + i) - x.row(i)) / delta_t_;
      }
    }
    return out;
  }

  Vector apply(const Vector& x) const { return apply(Matrix(x)).col(0); }

  Matrix dense() const { return apply(Matrix(Matrix::Identity(state_dim(), state_dim()))); }

 private:
  SensorArray sensors_;
  int n_;
  ObservedQuantity quantity_;
  double delta_t_;
};

struct FilterParams {
  double r_scale = 0.3;     // R = r_scale * I
  double gamma = 0.01;      // covariance inflation
  int rank = 120;           // SEEK rank
  double rank_tol = 1e-10;  // relative eigenvalue floor for SEEK rank reduction
  double sigma0 = 1.0;      // initial standard deviation of the position modes
  ObservedQuantity observed = ObservedQuantity::position;

  void validate() const {
    if (!(r_scale > 0.0)) throw ParameterError("FilterParams: r_scale must be positive");
    if (!(gamma >= 0.0)) throw ParameterError("FilterParams: gamma must be >= 0");
    if (rank < 1) throw ParameterError("FilterParams: rank must be >= 1");
    if (!(rank_tol >= 0.0)) throw ParameterError("FilterParams: rank_tol must be >= 0");
    if (!(sigma0 >= 0.0)) throw ParameterError("FilterParams: sigma0 must be >= 0");
  }
};

struct KalmanState {
  Vector x;
  linalg::SymMatrix P;
};

/// Square-root SEEK state. The effective forecast covariance is
/// (1 + gamma) S S^T; after an analysis S S^T is the analysis covariance.
struct SeekState {
  Vector x;
  Matrix S;

  int rank() const { return static_cast<int>(S.cols()); }
};

// --- Kalman filter ----------------------------------------------------------

/// K = P C^T (C P C^T + R)^{-1}: an m x m solve.
inline Matrix kalman_gain(const Matrix& P, const Matrix& C, double r_scale) {
  if (P.rows() != P.cols() || C.cols() != P.rows()) throw DimensionError("kalman_gain: shapes");
  const Matrix pct = P * C.transpose();
  Matrix innovation = C * pct;
  innovation.diagonal().array() += r_scale;
  Eigen::LLT<Matrix> llt(innovation);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("kalman_gain: innovation covariance is not positive definite");
  }
  return llt.solve(pct.transpose()).transpose();
}

/// K = [P^{-1} + C^T R^{-1} C]^{-1} C^T R^{-1}; needs P invertible.
inline Matrix kalman_gain_information_form(const Matrix& P, const Matrix& C, double r_scale) {
  if (P.rows() != P.cols() || C.cols() != P.rows()) {
    throw DimensionError("kalman_gain_information_form: shapes");
  }
  Eigen::LLT<Matrix> p_llt(P);
  if (p_llt.info() != Eigen::Success) {
    throw SingularityError("kalman_gain_information_form: P is not positive definite");
  }
  const Matrix p_inv = p_llt.solve(Matrix::Identity(P.rows(), P.cols()));
  const Matrix info = p_inv + C.transpose() * C / r_scale;
  Eigen::LLT<Matrix> llt(info);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("kalman_gain_information_form: information matrix is singular");
  }
  return llt.solve(C.transpose() / r_scale);
}

inline KalmanState kf_analysis(const KalmanState& state, const ObservationOperator& c,
                               const Vector& y_obs, const FilterParams& params) {
  params.validate();
  if (state.x.size() != c.state_dim() || state.P.dimension() != c.state_dim()) {
    throw DimensionError("kf_analysis: state dimension does not match the observation operator");
  }
  if (y_obs.size() != c.rows()) throw DimensionError("kf_analysis: observation length mismatch");
  if (c.rows() == 0) return state;

  const Matrix& P = state.P.matrix();
  const Matrix cp = c.apply(P);  // C P, m x 2n
  Matrix innovation_cov = c.apply(Matrix(cp.transpose()));
  innovation_cov = 0.5 * (innovation_cov + innovation_cov.transpose()).eval();
  innovation_cov.diagonal().array() += params.r_scale;
  Eigen::LLT<Matrix> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("kf_analysis: innovation covariance is not positive definite");
  }
  const Matrix gain = llt.solve(cp).transpose();  // P C^T S^{-1}

  KalmanState out;
  out.x = state.x - gain * (c.apply(state.x) - y_obs);
  if (!out.x.allFinite()) throw NumericalError("kf_analysis: non-finite analysis state");
  out.P = linalg::SymMatrix(P - gain * cp, 1e-8);
  return out;
}

/// x^f = M x^a, P^f = (1 + gamma) M P^a M^T.
inline KalmanState kf_forecast(const KalmanState& state, const Matrix& M,
                               const FilterParams& params) {
  params.validate();
  if (M.rows() != M.cols() || M.cols() != state.x.size() ||
      state.P.dimension() != state.x.size()) {
    throw DimensionError("kf_forecast: dimension mismatch");
  }
  KalmanState out;
  out.x = M * state.x;
  const Matrix mp = M * state.P.matrix();
  out.P = linalg::SymMatrix((1.0 + params.gamma) * (mp * M.transpose()), 1e-8);
  return out;
}

// --- SEEK filter ------------------------------------------------------------

/// Effective forecast covariance (1 + gamma) S S^T.
inline Matrix seek_covariance(const SeekState& state, double gamma) {
  return (1.0 + gamma) * state.S * state.S.transpose();
}

/// Drops directions of S whose eigenvalue of S^T S falls below
/// rank_tol * lambda_max. Returns S unchanged when nothing is dropped.
inline Matrix reduce_rank(const Matrix& S, double rank_tol) {
  if (S.cols() == 0) return S;
  const linalg::EigenDecomposition eig =
      linalg::sym_eig(linalg::SymMatrix(S.transpose() * S, 1e-8));
  const double lmax = eig.values(0);
  if (!(lmax > 0.0)) return S;
  const auto keep = static_cast<Eigen::Index>((eig.values.array() > rank_tol * lmax).count());
  if (keep == S.cols()) return S;
  return S * eig.vectors.leftCols(keep);
}

/// G = I_r + (C S)^T R^{-1} (C S), K = S G^{-1} (C S)^T R^{-1},
/// x^a = x^f - K (C x^f - y), S^a = S G^{-1/2}, with S the inflated factor.
inline SeekState seek_analysis(const SeekState& state, const ObservationOperator& c,
                               const Vector& y_obs, const FilterParams& params) {
  params.validate();
  if (state.x.size() != c.state_dim() || state.S.rows() != c.state_dim()) {
    throw DimensionError("seek_analysis: state dimension does not match the observation operator");
  }
  if (y_obs.size() != c.rows()) throw DimensionError("seek_analysis: observation length mismatch");
  if (state.S.cols() == 0) throw RankCollapseError("seek_analysis: factor has rank 0");

  const Matrix reduced = reduce_rank(state.S, params.rank_tol);
  const Matrix inflated = std::sqrt(1.0 + params.gamma) * reduced;
  if (c.rows() == 0) return {state.x, inflated};

  const Matrix cs = c.apply(inflated);  // m x r
  Matrix g = cs.transpose() * cs / params.r_scale;
  g.diagonal().array() += 1.0;
  const Matrix g_inv_sqrt = linalg::spd_inv_sqrt(linalg::SymMatrix(g, 1e-8)).matrix();

  const Matrix s_analysis = inflated * g_inv_sqrt;
  const Vector innovation = c.apply(state.x) - y_obs;
  // K d = S G^{-1/2} G^{-1/2} (CS)^T R^{-1} d
  const Vector correction = s_analysis * (g_inv_sqrt * (cs.transpose() * innovation)) / params.r_scale;

  SeekState out{state.x - correction, s_analysis};
  if (!out.x.allFinite() || !out.S.allFinite()) {
    throw NumericalError("seek_analysis: non-finite analysis state");
  }
  return out;
}

/// SEEK gain as an explicit matrix (tests and diagnostics).
inline Matrix seek_gain(const SeekState& state, const ObservationOperator& c,
                        const FilterParams& params) {
  const Matrix inflated = std::sqrt(1.0 + params.gamma) * state.S;
  const Matrix cs = c.apply(inflated);
  Matrix g = cs.transpose() * cs / params.r_scale;
  g.diagonal().array() += 1.0;
  return inflated * g.ldlt().solve(cs.transpose()) / params.r_scale;
}

/// x^f = M x^a, S^f = M S^a with a dense propagator.
inline SeekState seek_forecast(const SeekState& state, const Matrix& M) {
  if (M.rows() != M.cols() || M.cols() != state.x.size() || state.S.rows() != state.x.size()) {
    throw DimensionError("seek_forecast: dimension mismatch");
  }
  return {M * state.x, M * state.S};
}

/// Same forecast, stepping the wave model on the mean and on each column of S.
inline SeekState seek_forecast(const SeekState& state, const GridSpec& grid,
                               const SchemeParams& params, Direction direction) {
  if (state.x.size() != 2 * grid.n_interior || state.S.rows() != state.x.size()) {
    throw DimensionError("seek_forecast: dimension mismatch");
  }
  Matrix block(state.x.size(), state.S.cols() + 1);
  block.col(0) = state.x;
  block.rightCols(state.S.cols()) = state.S;
  const Matrix next = step_stacked(block, grid, params, direction);
  return {next.col(0), next.rightCols(state.S.cols())};
}

/// Orthonormal DCT-II basis of R^n, column j has frequency j.
inline Matrix dct_modes(int n) {
  Matrix phi(n, n);
  const double pi = std::acos(-1.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) phi(i, j) = std::cos(pi * j * (i + 0.5) / n);
    phi.col(j).normalize();
  }
  return phi;
}

/// Initial square-root covariance of size 2n x rank: column j < n is
/// sigma0 * (phi_j; phi_j) / sqrt(2), a zero-velocity perturbation of the
/// position along the j-th DCT mode. Columns j >= n are zero because the
/// zero-velocity subspace has dimension n.
inline Matrix init_sqrt_cov(int n, int rank, double sigma0) {
  if (n < 1) throw ParameterError("init_sqrt_cov: n must be >= 1");
  if (rank < 1 || rank > 2 * n) {
    throw ParameterError("init_sqrt_cov: rank must lie in [1, 2n]");
  }
  if (!(sigma0 >= 0.0)) throw ParameterError("init_sqrt_cov: sigma0 must be >= 0");
  const Matrix phi = dct_modes(n);
  Matrix s = Matrix::Zero(2 * n, rank);
  const int modes = std::min(rank, n);
  const double scale = sigma0 / std::sqrt(2.0);
  s.topLeftCorner(n, modes) = scale * phi.leftCols(modes);
  s.bottomLeftCorner(n, modes) = scale * phi.leftCols(modes);
  return s;
}

}  // namespace wavebf
