#pragma once

// Discrete 1-D wave model on (x_min, x_max) with homogeneous Dirichlet
// boundaries. Time stepping uses the theta-scheme
//
//   (p+ - 2p + p-)/dt^2 = D(theta p+ + (1-2 theta) p + theta p-)
//                         + eps D (p - p-)/dt + F
//
// where D is the 3-point Laplacian, p- is the level behind in the direction
// of integration and p+ the level ahead. Backward integration applies the
// same update to the reversed level sequence, so the attenuation term damps
// in both directions.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wavebf/errors.hpp"
#include "wavebf/linalg.hpp"

namespace wavebf {

struct GridSpec {
  double x_min = -0.5;
  double x_max = 0.5;
  int n_interior = 100;  // interior nodes; boundary values are implicit zeros

  double delta_x() const { return (x_max - x_min) / (n_interior + 1); }
  double length() const { return x_max - x_min; }
  /// Coordinate of interior node i (0-based).
  double node(int i) const { return x_min + (i + 1) * delta_x(); }

  Vector nodes() const {
    Vector x(n_interior);
    for (int i = 0; i < n_interior; ++i) x(i) = node(i);
    return x;
  }

  void validate() const {
    if (!(x_max > x_min)) throw ParameterError("GridSpec: x_max must exceed x_min");
    if (n_interior < 3) throw ParameterError("GridSpec: n_interior must be at least 3");
  }

  /// Grid whose spacing is as close as possible to `spacing`.
  static GridSpec with_spacing(double x_min, double x_max, double spacing) {
    if (!(spacing > 0.0)) throw ParameterError("GridSpec: delta_x must be positive");
    GridSpec g{x_min, x_max, 0};
    g.n_interior = static_cast<int>(std::lround((x_max - x_min) / spacing)) - 1;
    g.validate();
    return g;
  }
};

enum class Direction { forward, backward };

inline const char* to_string(Direction d) {
  return d == Direction::forward ? "forward" : "backward";
}

struct SchemeParams {
  double delta_t = 1.0 / 200.0;
  int n_steps = 200;
  double theta = 0.25;
  std::optional<double> attenuation_alpha;  // eps = dx^alpha when set

  double final_time() const { return n_steps * delta_t; }

  double epsilon(const GridSpec& grid) const {
    return attenuation_alpha ? std::pow(grid.delta_x(), *attenuation_alpha) : 0.0;
  }

  /// Largest stable time step for explicit-leaning schemes (theta < 1/4).
  static double stability_bound(double delta_x, double theta) {
    return delta_x / std::sqrt(1.0 - 4.0 * theta);
  }

  void validate(const GridSpec& grid) const {
    grid.validate();
    if (!(delta_t > 0.0)) throw ParameterError("SchemeParams: delta_t must be positive");
    if (n_steps < 1) throw ParameterError("SchemeParams: n_steps must be at least 1");
    if (!(theta >= 0.0 && theta <= 0.5)) {
      throw ParameterError("SchemeParams: theta must lie in [0, 1/2]");
    }
    if (attenuation_alpha && !(*attenuation_alpha > 1.0 && *attenuation_alpha <= 2.0)) {
      throw ParameterError("SchemeParams: attenuation alpha must lie in (1, 2]");
    }
    if (theta < 0.25) {
      const double bound = stability_bound(grid.delta_x(), theta);
      if (delta_t > bound) {
        throw ParameterError("SchemeParams: delta_t=" + std::to_string(delta_t) +
                             " violates the stability bound " + std::to_string(bound) +
                             " for theta=" + std::to_string(theta));
      }
    }
  }
};

/// Two consecutive pressure levels in physical time order: p_prev is level
/// step_index-1, p_curr is level step_index.
struct WaveState {
  Vector p_prev;
  Vector p_curr;
  int step_index = 0;

  /// Zero initial velocity: both levels equal f0.
  static WaveState at_rest(const Vector& f0, int index = 0) { return {f0, f0, index}; }

  static WaveState zero(int n, int index = 0) {
    return {Vector::Zero(n), Vector::Zero(n), index};
  }

  Eigen::Index size() const { return p_curr.size(); }

  /// Stacked (p_prev; p_curr), the filters' state vector.
  Vector stacked() const {
    Vector x(2 * size());
    x << p_prev, p_curr;
    return x;
  }

  static WaveState from_stacked(const Vector& x, int index) {
    if (x.size() % 2 != 0) throw DimensionError("WaveState: stacked vector has odd length");
    const Eigen::Index n = x.size() / 2;
    return {x.head(n), x.tail(n), index};
  }

  Vector velocity(double delta_t) const { return (p_curr - p_prev) / delta_t; }
};

struct Phantom {
  Vector values;
  std::string label;
};

namespace detail {

template <class Derived>
Matrix laplacian_block(const Eigen::MatrixBase<Derived>& v, double delta_x) {
  const Eigen::Index n = v.rows();
  const double inv = 1.0 / (delta_x * delta_x);
  Matrix out = -2.0 * v;
  if (n > 1) {
    out.topRows(n - 1) += v.bottomRows(n - 1);
    out.bottomRows(n - 1) += v.topRows(n - 1);
  }
  return out * inv;
}

// Level ahead of `center` given the level `behind`, column-wise.
inline Matrix advance_block(const Matrix& behind, const Matrix& center, const GridSpec& grid,
                            const SchemeParams& params, const Matrix* feedback) {
  const double dt = params.delta_t;
  const double dt2 = dt * dt;
  const double theta = params.theta;
  const double dx = grid.delta_x();
  const double eps = params.epsilon(grid);

  Matrix rhs = 2.0 * center - behind;
  rhs += dt2 * ((1.0 - 2.0 * theta) * laplacian_block(center, dx) +
                theta * laplacian_block(behind, dx));
  if (eps != 0.0) rhs += eps * dt * laplacian_block(center - behind, dx);
  if (feedback != nullptr) rhs += dt2 * (*feedback);
  if (theta == 0.0) return rhs;

  const Eigen::Index n = center.rows();
  const double off = -theta * dt2 / (dx * dx);
  const Vector diag = Vector::Constant(n, 1.0 - 2.0 * off);
  const Vector side = Vector::Constant(n - 1, off);
  return linalg::solve_tridiagonal_block(diag, side, side, rhs);
}

inline void check_finite(const Matrix& m, int step_index) {
  if (!m.allFinite()) {
    throw NumericalError("numerical blow-up: non-finite values at step " +
                         std::to_string(step_index));
  }
}

}  // namespace detail

/// Standard 3-point second difference with zero ghost values.
inline Vector apply_laplacian(const Vector& v, const GridSpec& grid) {
  if (v.size() != grid.n_interior) {
    throw DimensionError("apply_laplacian: vector length " + std::to_string(v.size()) +
                         " != n_interior " + std::to_string(grid.n_interior));
  }
  return detail::laplacian_block(v, grid.delta_x());
}

/// Dense tridiagonal Laplacian (tests and diagnostics).
inline Matrix laplacian_matrix(const GridSpec& grid) {
  const int n = grid.n_interior;
  const double inv = 1.0 / (grid.delta_x() * grid.delta_x());
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = -2.0 * inv;
    if (i > 0) a(i, i - 1) = inv;
    if (i + 1 < n) a(i, i + 1) = inv;
  }
  return a;
}

/// One time step. `feedback`, when given, is the assembled correction term F
/// (already signed for the direction of integration).
inline WaveState step(const WaveState& state, const GridSpec& grid, const SchemeParams& params,
                      Direction direction, const Vector* feedback = nullptr) {
  params.validate(grid);
  const int n = grid.n_interior;
  if (state.p_prev.size() != n || state.p_curr.size() != n) {
    throw DimensionError("step: state length does not match n_interior");
  }
  if (feedback != nullptr && feedback->size() != n) {
    throw DimensionError("step: feedback length does not match n_interior");
  }
  const Matrix* fb = nullptr;
  Matrix fb_block;
  if (feedback != nullptr) {
    fb_block = *feedback;
    fb = &fb_block;
  }
  if (direction == Direction::forward) {
    Matrix ahead = detail::advance_block(state.p_prev, state.p_curr, grid, params, fb);
    detail::check_finite(ahead, state.step_index + 1);
    return {state.p_curr, ahead.col(0), state.step_index + 1};
  }
  Matrix ahead = detail::advance_block(state.p_curr, state.p_prev, grid, params, fb);
  detail::check_finite(ahead, state.step_index - 1);
  return {ahead.col(0), state.p_prev, state.step_index - 1};
}

inline WaveState step(const WaveState& state, const GridSpec& grid, const SchemeParams& params,
                      Direction direction, const Vector& feedback) {
  return step(state, grid, params, direction, &feedback);
}

/// Feedback-free step applied to every column of a stacked (2n x k) matrix
/// whose columns are (p_prev; p_curr). This is the propagator M applied
/// without materializing it.
inline Matrix step_stacked(const Matrix& stacked, const GridSpec& grid, const SchemeParams& params,
                           Direction direction) {
  params.validate(grid);
  const int n = grid.n_interior;
  if (stacked.rows() != 2 * n) throw DimensionError("step_stacked: expected 2n rows");
  const Matrix prev = stacked.topRows(n);
  const Matrix curr = stacked.bottomRows(n);
  Matrix out(2 * n, stacked.cols());
  if (direction == Direction::forward) {
    out.topRows(n) = curr;
    out.bottomRows(n) = detail::advance_block(prev, curr, grid, params, nullptr);
  } else {
    out.topRows(n) = detail::advance_block(curr, prev, grid, params, nullptr);
    out.bottomRows(n) = prev;
  }
  detail::check_finite(out, -1);
  return out;
}

/// Maps (step index, current state) to a feedback vector for the next step.
using FeedbackSource = std::function<Vector(int, const WaveState&)>;

/// Streams every state (including the initial one) to `consumer` and
/// returns the last state.
template <class Consumer>
WaveState propagate_streaming(const WaveState& initial, const GridSpec& grid,
                              const SchemeParams& params, Direction direction,
                              const FeedbackSource& feedback_source, Consumer&& consumer,
                              std::optional<int> n_steps = std::nullopt) {
  const int steps = n_steps.value_or(params.n_steps);
  if (steps < 0) throw ParameterError("propagate: negative step count");
  WaveState state = initial;
  consumer(state);
  for (int k = 0; k < steps; ++k) {
    if (feedback_source) {
      const Vector fb = feedback_source(state.step_index, state);
      state = step(state, grid, params, direction, &fb);
    } else {
      state = step(state, grid, params, direction);
    }
    consumer(state);
  }
  return state;
}

/// All n_steps + 1 states of a run, the initial state first.
inline std::vector<WaveState> propagate(const WaveState& initial, const GridSpec& grid,
                                        const SchemeParams& params, Direction direction,
                                        const FeedbackSource& feedback_source = {},
                                        std::optional<int> n_steps = std::nullopt) {
  std::vector<WaveState> states;
  states.reserve(static_cast<std::size_t>(n_steps.value_or(params.n_steps)) + 1);
  propagate_streaming(
      initial, grid, params, direction, feedback_source,
      [&](const WaveState& s) { states.push_back(s); }, n_steps);
  return states;
}

/// Quadratic form conserved exactly by the eps = 0 scheme:
///
///   E = 1/2 |v|^2 + 1/2 <A m, m> + 1/2 (theta - 1/4) dt^2 <A v, v>
///
/// with A = -D, v = (p_curr - p_prev)/dt, m = (p_curr + p_prev)/2 and the
/// dx-weighted inner product. Pairing the scheme with (p+ - p-)/(2 dt)
/// shows E(step(s)) = E(s) when eps = 0 and F = 0; the attenuation term
/// removes eps*dt/2 * (<A v-, v-> + <A v-, v+>) per step.
inline double discrete_energy(const WaveState& state, const GridSpec& grid,
                              const SchemeParams& params) {
  const int n = grid.n_interior;
  if (state.p_prev.size() != n || state.p_curr.size() != n) {
    throw DimensionError("discrete_energy: state length does not match n_interior");
  }
  const double dx = grid.delta_x();
  const double dt = params.delta_t;
  const Vector v = (state.p_curr - state.p_prev) / dt;
  const Vector mid = 0.5 * (state.p_curr + state.p_prev);
  const Vector a_mid = -apply_laplacian(mid, grid);
  const Vector a_v = -apply_laplacian(v, grid);
  const double kinetic = 0.5 * v.squaredNorm();
  const double potential = 0.5 * mid.dot(a_mid);
  const double correction = 0.5 * (params.theta - 0.25) * dt * dt * v.dot(a_v);
  return dx * (kinetic + potential + correction);
}

/// Dense one-step map on stacked states: step(s).stacked() == M * s.stacked()
/// for feedback-free stepping.
inline Matrix propagator_matrix(const GridSpec& grid, const SchemeParams& params,
                                Direction direction) {
  const int n2 = 2 * grid.n_interior;
  return step_stacked(Matrix::Identity(n2, n2), grid, params, direction);
}

}  // namespace wavebf
