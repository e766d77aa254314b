#pragma once

// Initial-data reconstruction: Time Reversal, Back-and-Forth Nudging, Kalman
// filter reconstruction and Back-and-Forth SEEK.
//
// Every back-and-forth method iterates
//   forward pass from (e_{k-1}, e_{k-1}) at t = 0 (zero initial velocity),
//   backward pass from the final forward state at t = T,
// and takes the t = 0 pressure of the backward pass as the new estimate e_k.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wavebf/errors.hpp"
#include "wavebf/filters.hpp"
#include "wavebf/observation.hpp"
#include "wavebf/wave_core.hpp"

namespace wavebf {

/// Everything a reconstruction reads. `scheme` describes the model used for
/// reconstruction (including its attenuation); `truth` is only used to
/// report errors.
struct Problem {
  GridSpec grid;
  SchemeParams scheme;
  SensorArray sensors;
  ObservationRecord record;
  std::optional<Vector> truth;

  int n() const { return grid.n_interior; }

  void validate() const {
    scheme.validate(grid);
    if (record.n_levels() != scheme.n_steps + 1) {
      throw DimensionError("Problem: record has " + std::to_string(record.n_levels()) +
                           " levels, expected " + std::to_string(scheme.n_steps + 1));
    }
    if (record.n_sensors() != sensors.count()) {
      throw DimensionError("Problem: record width does not match the sensor count");
    }
    for (int i : sensors.indices) {
      if (i < 0 || i >= grid.n_interior) throw DimensionError("Problem: sensor index out of range");
    }
    if (truth && truth->size() != grid.n_interior) {
      throw DimensionError("Problem: truth length does not match n_interior");
    }
  }

  /// Sensor data at level k. Level -1 repeats level 0, matching the at-rest
  /// start p_{-1} = p_0 used to generate data.
  Vector data(int level) const { return record.level(std::max(level, 0)); }
};

struct NudgingParams {
  double gain = 0.0;  // continuous feedback gain k
  bool use_derivative_feedback = true;

  /// Gain whose per-step correction weight k * dt^2 equals `weight`.
  static NudgingParams from_step_weight(double weight, double delta_t, bool derivative = true) {
    return {weight / (delta_t * delta_t), derivative};
  }

  /// k * dt^2 = 0.9 dt, i.e. k = 0.9 / dt.
  static NudgingParams defaults(double delta_t) { return from_step_weight(0.9 * delta_t, delta_t); }

  void validate() const {
    if (!(gain > 0.0) || !std::isfinite(gain)) {
      throw ParameterError("NudgingParams: gain must be positive");
    }
  }
};

struct IterationControl {
  int max_iterations = 100;
  double rel_tol = 1e-3;
  std::string metric = "rms-change";

  void validate() const {
    if (max_iterations < 1) throw ParameterError("IterationControl: max_iterations must be >= 1");
    if (!(rel_tol > 0.0)) throw ParameterError("IterationControl: rel_tol must be positive");
    if (metric != "rms-change") {
      throw ParameterError("IterationControl: unknown metric '" + metric + "'");
    }
  }
};

struct ReconstructionResult {
  Vector estimate;
  double rms_percent = std::numeric_limits<double>::quiet_NaN();
  int iterations_used = 0;
  std::vector<double> per_iteration_rms;     // NaN entries when no truth is known
  std::vector<double> per_iteration_change;  // ||e_k - e_{k-1}|| / ||e_k||
  std::string method;
  bool converged = false;
  bool diverged = false;
};

/// 100 * ||estimate - truth|| / ||truth||.
inline double relative_rms(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw DimensionError("relative_rms: length mismatch");
  const double norm = truth.norm();
  if (!(norm > 0.0)) throw UndefinedMetricError("relative_rms: truth has zero norm");
  return 100.0 * (estimate - truth).norm() / norm;
}

/// Bookkeeping shared by the iterative methods: convergence on the relative
/// change between successive estimates, and divergence when the error
/// against a known truth exceeds ten times its minimum.
class IterationMonitor {
 public:
  IterationMonitor(const IterationControl& control, std::optional<Vector> truth, Vector guess)
      : control_(control), truth_(std::move(truth)), previous_(std::move(guess)) {
    control_.validate();
  }

  /// Registers e_k; returns true when iteration should stop.
  bool add(const Vector& estimate) {
    ++iterations_;
    if (!estimate.allFinite()) {
      diverged_ = true;
      return true;
    }
    const double diff = (estimate - previous_).norm();
    const double norm = estimate.norm();
    const double change = diff == 0.0 ? 0.0 : (norm > 0.0 ? diff / norm : std::numeric_limits<double>::infinity());
    changes_.push_back(change);

    double rms = std::numeric_limits<double>::quiet_NaN();
    if (truth_) rms = relative_rms(estimate, *truth_);
    rms_.push_back(rms);

    if (!best_ || (truth_ && rms < best_rms_)) {
      best_ = estimate;
      best_rms_ = rms;
    }
    if (!truth_) best_ = estimate;
    previous_ = estimate;

    if (truth_ && rms > 10.0 * best_rms_) {
      diverged_ = true;
      return true;
    }
    if (change < control_.rel_tol) {
      converged_ = true;
      return true;
    }
    return iterations_ >= control_.max_iterations;
  }

  /// Called when a pass blew up; the best finite iterate is kept.
  void mark_diverged() {
    ++iterations_;
    diverged_ = true;
  }

  ReconstructionResult finish(std::string method) const {
    ReconstructionResult r;
    r.method = std::move(method);
    r.estimate = diverged_ && best_ ? *best_ : previous_;
    r.iterations_used = iterations_;
    r.per_iteration_rms = rms_;
    r.per_iteration_change = changes_;
    r.converged = converged_;
    r.diverged = diverged_;
    if (truth_) r.rms_percent = relative_rms(r.estimate, *truth_);
    return r;
  }

 private:
  IterationControl control_;
  std::optional<Vector> truth_;
  Vector previous_;
  std::optional<Vector> best_;
  double best_rms_ = std::numeric_limits<double>::infinity();
  std::vector<double> rms_;
  std::vector<double> changes_;
  int iterations_ = 0;
  bool converged_ = false;
  bool diverged_ = false;
};

namespace detail {

inline ReconstructionResult single_pass_result(const Problem& problem, Vector estimate,
                                               std::string method) {
  ReconstructionResult r;
  r.method = std::move(method);
  r.estimate = std::move(estimate);
  r.iterations_used = 1;
  r.converged = true;
  r.per_iteration_change.push_back(std::numeric_limits<double>::quiet_NaN());
  if (problem.truth) {
    r.rms_percent = relative_rms(r.estimate, *problem.truth);
    r.per_iteration_rms.push_back(r.rms_percent);
  } else {
    r.per_iteration_rms.push_back(std::numeric_limits<double>::quiet_NaN());
  }
  return r;
}

inline void impose(Vector& p, const SensorArray& sensors, const Vector& values) {
  for (int j = 0; j < sensors.count(); ++j) p(sensors.indices[static_cast<std::size_t>(j)]) = values(j);
}

inline Vector guess_values(const Problem& problem, const Phantom& guess) {
  if (guess.values.size() != problem.n()) {
    throw DimensionError("initial guess length does not match n_interior");
  }
  return guess.values;
}

/// Observations matching the filter's observation operator at level k.
inline Vector filter_data(const Problem& problem, const FilterParams& params, int level) {
  if (params.observed == ObservedQuantity::position) return problem.data(level);
  return (problem.data(level) - problem.data(level - 1)) / problem.scheme.delta_t;
}

}  // namespace detail

/// Single backward pass from the final state (zero by default) with the
/// recorded values imposed at the sensor nodes on every level.
inline ReconstructionResult time_reversal(const Problem& problem,
                                          const std::optional<WaveState>& final_state = std::nullopt) {
  problem.validate();
  const int n = problem.n();
  const int steps = problem.scheme.n_steps;
  WaveState state = final_state ? *final_state : WaveState::zero(n, steps);
  if (state.size() != n) throw DimensionError("time_reversal: final state length mismatch");
  state.step_index = steps;
  detail::impose(state.p_prev, problem.sensors, problem.data(steps - 1));
  detail::impose(state.p_curr, problem.sensors, problem.data(steps));
  for (int k = steps; k > 0; --k) {
    state = step(state, problem.grid, problem.scheme, Direction::backward);
    const int level = k - 2;  // the level just computed
    if (level >= 0) detail::impose(state.p_prev, problem.sensors, problem.data(level));
  }
  return detail::single_pass_result(problem, state.p_curr, "TR");
}

/// Feedback -k C^*(q) for the step leaving `state`, where q is the
/// innovation C p - p^o at the centre level or, with derivative feedback,
/// its difference to the level behind divided by dt. Levels are ordered in
/// the direction of integration, which flips the sign of the time
/// derivative on backward passes.
inline Vector nudging_feedback(const WaveState& state, const Problem& problem,
                               const NudgingParams& nudging, Direction direction) {
  const bool fwd = direction == Direction::forward;
  const Vector& center = fwd ? state.p_curr : state.p_prev;
  const Vector& behind = fwd ? state.p_prev : state.p_curr;
  const int center_level = fwd ? state.step_index : state.step_index - 1;
  const int behind_level = fwd ? state.step_index - 1 : state.step_index;

  Vector q = gather(center, problem.sensors) - problem.data(center_level);
  if (nudging.use_derivative_feedback) {
    const Vector behind_innovation = gather(behind, problem.sensors) - problem.data(behind_level);
    q = (q - behind_innovation) / problem.scheme.delta_t;
  }
  return scatter(-nudging.gain * q, problem.sensors, problem.n());
}

/// One nudged pass. Forward passes start at level 0, backward passes at the
/// final level. Returns every state of the pass.
inline std::vector<WaveState> nudging_pass(const WaveState& initial, const Problem& problem,
                                           const NudgingParams& nudging, Direction direction) {
  problem.validate();
  nudging.validate();
  const int expected = direction == Direction::forward ? 0 : problem.scheme.n_steps;
  if (initial.step_index != expected) {
    throw ParameterError(std::string("nudging_pass: ") + to_string(direction) +
                         " pass must start at step " + std::to_string(expected));
  }
  const FeedbackSource source = [&](int, const WaveState& s) {
    return nudging_feedback(s, problem, nudging, direction);
  };
  return propagate(initial, problem.grid, problem.scheme, direction, source);
}

inline ReconstructionResult bfn_reconstruct(const Problem& problem, const NudgingParams& nudging,
                                            const IterationControl& control,
                                            const Phantom& initial_guess) {
  problem.validate();
  nudging.validate();
  Vector estimate = detail::guess_values(problem, initial_guess);
  IterationMonitor monitor(control, problem.truth, estimate);
  const FeedbackSource forward_fb = [&](int, const WaveState& s) {
    return nudging_feedback(s, problem, nudging, Direction::forward);
  };
  const FeedbackSource backward_fb = [&](int, const WaveState& s) {
    return nudging_feedback(s, problem, nudging, Direction::backward);
  };
  const auto ignore = [](const WaveState&) {};
  for (;;) {
    try {
      const WaveState end = propagate_streaming(WaveState::at_rest(estimate), problem.grid,
                                                problem.scheme, Direction::forward, forward_fb,
                                                ignore);
      const WaveState start = propagate_streaming(end, problem.grid, problem.scheme,
                                                  Direction::backward, backward_fb, ignore);
      estimate = start.p_curr;
    } catch (const NumericalError&) {
      monitor.mark_diverged();
      break;
    }
    if (monitor.add(estimate)) break;
  }
  return monitor.finish("BFN");
}

/// One forward Kalman assimilation over the record, then the final analysis
/// is carried back to t = 0 with the feedback-free backward model.
inline ReconstructionResult kf_reconstruct(const Problem& problem, const FilterParams& params,
                                           const Phantom& initial_guess) {
  problem.validate();
  params.validate();
  const int n = problem.n();
  const int steps = problem.scheme.n_steps;
  const Vector guess = detail::guess_values(problem, initial_guess);
  const ObservationOperator c(problem.sensors, n, params.observed, problem.scheme.delta_t);
  const Matrix m_forward = propagator_matrix(problem.grid, problem.scheme, Direction::forward);

  const Matrix s0 = init_sqrt_cov(n, n, params.sigma0);
  KalmanState state{WaveState::at_rest(guess).stacked(),
                    linalg::SymMatrix(s0 * s0.transpose())};
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) state = kf_forecast(state, m_forward, params);
    state = kf_analysis(state, c, detail::filter_data(problem, params, k), params);
  }
  const WaveState start = propagate_streaming(WaveState::from_stacked(state.x, steps), problem.grid,
                                              problem.scheme, Direction::backward, {},
                                              [](const WaveState&) {});
  return detail::single_pass_result(problem, start.p_curr, "KF");
}

/// Alternating forward and backward SEEK assimilation. The square-root
/// factor S is carried across turns; the mean is restarted at rest from the
/// current estimate for each forward pass.
inline ReconstructionResult bf_seek_reconstruct(const Problem& problem, const FilterParams& params,
                                                const IterationControl& control,
                                                const Phantom& initial_guess) {
  problem.validate();
  params.validate();
  const int n = problem.n();
  const int steps = problem.scheme.n_steps;
  if (params.rank > 2 * n) throw ParameterError("bf_seek_reconstruct: rank exceeds 2n");
  Vector estimate = detail::guess_values(problem, initial_guess);
  const ObservationOperator c(problem.sensors, n, params.observed, problem.scheme.delta_t);

  Matrix factor = init_sqrt_cov(n, params.rank, params.sigma0);
  if (factor.isZero(0.0)) throw RankCollapseError("bf_seek_reconstruct: initial factor is zero");

  IterationMonitor monitor(control, problem.truth, estimate);
  for (;;) {
    try {
      SeekState state{WaveState::at_rest(estimate).stacked(), factor};
      for (int k = 0; k <= steps; ++k) {
        if (k > 0) state = seek_forecast(state, problem.grid, problem.scheme, Direction::forward);
        state = seek_analysis(state, c, detail::filter_data(problem, params, k), params);
      }
      for (int k = steps - 1; k >= 0; --k) {
        state = seek_forecast(state, problem.grid, problem.scheme, Direction::backward);
        state = seek_analysis(state, c, detail::filter_data(problem, params, k), params);
      }
      if (state.rank() == 0) throw RankCollapseError("bf_seek_reconstruct: rank collapsed to 0");
      estimate = state.x.tail(n);
      factor = state.S;
    } catch (const RankCollapseError&) {
      throw;
    } catch (const NumericalError&) {
      monitor.mark_diverged();
      break;
    }
    if (monitor.add(estimate)) break;
  }
  return monitor.finish("BF-SEEK");
}

}  // namespace wavebf
