#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "oracles.hpp"
#include "wavebf/wave_core.hpp"

using namespace wavebf;

namespace {

GridSpec small_grid(int n) { return GridSpec{0.0, static_cast<double>(n + 1), n}; }

// Backward map on (p_prev; p_curr): the level behind is p_curr, the level
// being advanced from is p_prev.
Matrix backward_oracle(int n, double dx, double dt, double theta, double eps) {
  const Matrix fwd = oracle::scheme_matrix(n, dx, dt, theta, eps);
  const Matrix a_b0 = fwd.bottomLeftCorner(n, n);
  const Matrix a_b1 = fwd.bottomRightCorner(n, n);
  Matrix m = Matrix::Zero(2 * n, 2 * n);
  m.topLeftCorner(n, n) = a_b1;
  m.topRightCorner(n, n) = a_b0;
  m.bottomLeftCorner(n, n) = Matrix::Identity(n, n);
  return m;
}

Vector smooth_profile(const GridSpec& grid) {
  Vector f(grid.n_interior);
  for (int i = 0; i < grid.n_interior; ++i) {
    const double x = grid.node(i);
    f(i) = std::exp(-std::pow((x + 0.1) / 0.07, 2)) - 0.5 * std::exp(-std::pow((x - 0.2) / 0.1, 2));
  }
  return f;
}

}  // namespace

TEST(Grid, DefaultSpacing) {
  const GridSpec g;
  EXPECT_DOUBLE_EQ(g.delta_x(), 1.0 / 101.0);
  EXPECT_DOUBLE_EQ(g.node(0), -0.5 + 1.0 / 101.0);
  EXPECT_EQ(GridSpec::with_spacing(-0.5, 0.5, 0.01).n_interior, 99);
  EXPECT_THROW((GridSpec{0.0, 1.0, 2}.validate()), ParameterError);
}

TEST(Laplacian, UnitSpacingExamples) {
  const GridSpec g = small_grid(3);
  ASSERT_DOUBLE_EQ(g.delta_x(), 1.0);
  const Vector a = apply_laplacian((Vector(3) << 0.0, 1.0, 0.0).finished(), g);
  EXPECT_EQ(a, (Vector(3) << 1.0, -2.0, 1.0).finished());
  const Vector b = apply_laplacian(Vector::Ones(3), g);
  EXPECT_EQ(b, (Vector(3) << -1.0, 0.0, -1.0).finished());
  EXPECT_THROW(apply_laplacian(Vector::Ones(4), g), DimensionError);
}

TEST(Laplacian, MatchesDenseOracle) {
  std::mt19937_64 rng(1);
  const GridSpec g;
  const Vector v = oracle::random_vector(rng, g.n_interior);
  const Matrix ref = oracle::laplacian(g.n_interior, g.delta_x());
  EXPECT_LE((apply_laplacian(v, g) - ref * v).norm(), 1e-10 * (ref * v).norm());
  EXPECT_LE((laplacian_matrix(g) - ref).norm(), 1e-10 * ref.norm());
}

TEST(Step, ExplicitLeapfrogHandExample) {
  const GridSpec g = small_grid(3);
  SchemeParams p;
  p.delta_t = 1.0;
  p.theta = 0.0;
  const WaveState s = WaveState::at_rest((Vector(3) << 0.0, 1.0, 0.0).finished());
  const WaveState next = step(s, g, p, Direction::forward);
  EXPECT_EQ(next.p_curr, (Vector(3) << 1.0, -1.0, 1.0).finished());
  EXPECT_EQ(next.p_prev, s.p_curr);
  EXPECT_EQ(next.step_index, 1);
}

TEST(Step, ZeroStateStaysZero) {
  const GridSpec g;
  const SchemeParams p;
  const auto states = propagate(WaveState::zero(g.n_interior), g, p, Direction::forward);
  ASSERT_EQ(states.size(), 201u);
  for (const auto& s : states) EXPECT_EQ(s.p_curr.norm(), 0.0);
}

TEST(Step, ZeroStepsReturnsInitialState) {
  const GridSpec g;
  const SchemeParams p;
  const WaveState s0 = WaveState::at_rest(smooth_profile(g));
  const auto states = propagate(s0, g, p, Direction::forward, {}, 0);
  ASSERT_EQ(states.size(), 1u);
  EXPECT_EQ(states[0].p_curr, s0.p_curr);
}

TEST(Step, PropagatorMatchesDenseOracleBothDirections) {
  for (double theta : {0.0, 0.25, 0.4}) {
    for (double eps : {0.0, 0.01}) {
      const GridSpec g{-0.5, 0.5, 12};
      SchemeParams p;
      p.delta_t = 0.5 * g.delta_x();
      p.theta = theta;
      if (eps > 0.0) p.attenuation_alpha = std::log(eps) / std::log(g.delta_x());
      const double e = p.epsilon(g);
      const Matrix fwd = oracle::scheme_matrix(12, g.delta_x(), p.delta_t, theta, e);
      const Matrix bwd = backward_oracle(12, g.delta_x(), p.delta_t, theta, e);
      EXPECT_LE((propagator_matrix(g, p, Direction::forward) - fwd).norm(), 1e-10 * fwd.norm());
      EXPECT_LE((propagator_matrix(g, p, Direction::backward) - bwd).norm(), 1e-10 * bwd.norm());
    }
  }
}

TEST(Step, StackedStepAgreesWithSingleStep) {
  std::mt19937_64 rng(2);
  const GridSpec g;
  SchemeParams p;
  p.attenuation_alpha = 1.8;
  const Matrix cols = oracle::random_matrix(rng, 2 * g.n_interior, 4);
  for (Direction d : {Direction::forward, Direction::backward}) {
    const Matrix out = step_stacked(cols, g, p, d);
    for (int j = 0; j < 4; ++j) {
      const WaveState s = WaveState::from_stacked(cols.col(j), 5);
      EXPECT_LE((step(s, g, p, d).stacked() - out.col(j)).norm(), 1e-12 * out.col(j).norm());
    }
  }
}

TEST(Step, ForwardThenBackwardIsIdentityWithoutAttenuation) {
  std::mt19937_64 rng(3);
  const GridSpec g;
  const SchemeParams p;
  const WaveState s0{smooth_profile(g), smooth_profile(g) + 1e-3 * oracle::random_vector(rng, g.n_interior), 0};
  const WaveState end = propagate(s0, g, p, Direction::forward).back();
  EXPECT_EQ(end.step_index, p.n_steps);
  const WaveState back = propagate(end, g, p, Direction::backward).back();
  EXPECT_EQ(back.step_index, 0);
  EXPECT_LE((back.p_curr - s0.p_curr).norm(), 1e-10 * s0.p_curr.norm());
  EXPECT_LE((back.p_prev - s0.p_prev).norm(), 1e-10 * s0.p_prev.norm());
}

TEST(Step, LinearInStateAndFeedback) {
  std::mt19937_64 rng(4);
  const GridSpec g;
  SchemeParams p;
  p.attenuation_alpha = 1.5;
  const int n = g.n_interior;
  const WaveState a{oracle::random_vector(rng, n), oracle::random_vector(rng, n), 3};
  const WaveState b{oracle::random_vector(rng, n), oracle::random_vector(rng, n), 3};
  const Vector fa = oracle::random_vector(rng, n);
  const Vector fb = oracle::random_vector(rng, n);
  const double alpha = 0.7, beta = -1.3;
  const WaveState mix{alpha * a.p_prev + beta * b.p_prev, alpha * a.p_curr + beta * b.p_curr, 3};
  const Vector fmix = alpha * fa + beta * fb;
  for (Direction d : {Direction::forward, Direction::backward}) {
    const Vector lhs = step(mix, g, p, d, fmix).stacked();
    const Vector rhs = alpha * step(a, g, p, d, fa).stacked() + beta * step(b, g, p, d, fb).stacked();
    EXPECT_LE((lhs - rhs).norm(), 1e-10 * rhs.norm());
  }
}

TEST(Energy, ConservedWithoutAttenuation) {
  const GridSpec g;
  for (double theta : {0.0, 0.25, 0.5}) {
    SchemeParams p;
    p.theta = theta;
    p.delta_t = 0.5 * g.delta_x();
    const auto states = propagate(WaveState::at_rest(smooth_profile(g)), g, p, Direction::forward);
    const double e0 = discrete_energy(states.front(), g, p);
    ASSERT_GT(e0, 0.0);
    for (const auto& s : states) EXPECT_NEAR(discrete_energy(s, g, p), e0, 1e-12 * e0);
  }
}

TEST(Energy, NonIncreasingWithAttenuationInBothDirections) {
  const GridSpec g;
  for (double alpha : {1.2, 1.8, 2.0}) {
    SchemeParams p;
    p.attenuation_alpha = alpha;
    for (Direction d : {Direction::forward, Direction::backward}) {
      WaveState s = WaveState::at_rest(smooth_profile(g), d == Direction::forward ? 0 : p.n_steps);
      double prev = discrete_energy(s, g, p);
      const double e0 = prev;
      for (int k = 0; k < p.n_steps; ++k) {
        s = step(s, g, p, d);
        const double e = discrete_energy(s, g, p);
        EXPECT_LE(e, prev + 1e-13 * e0);
        prev = e;
      }
      EXPECT_LT(prev, e0);
    }
  }
}

TEST(SchemeParams, Validation) {
  const GridSpec g;
  SchemeParams p;
  p.theta = 0.0;
  p.delta_t = 1.01 * g.delta_x();
  EXPECT_THROW(p.validate(g), ParameterError);
  p.delta_t = 0.99 * g.delta_x();
  EXPECT_NO_THROW(p.validate(g));
  p.theta = 0.25;
  p.delta_t = 10.0 * g.delta_x();
  EXPECT_NO_THROW(p.validate(g));
  p.attenuation_alpha = 1.0;
  EXPECT_THROW(p.validate(g), ParameterError);
  p.attenuation_alpha = 2.5;
  EXPECT_THROW(p.validate(g), ParameterError);
  p.attenuation_alpha = 2.0;
  EXPECT_NO_THROW(p.validate(g));
  p.n_steps = 0;
  EXPECT_THROW(p.validate(g), ParameterError);
}

TEST(Step, NonFiniteValuesReportBlowUp) {
  const GridSpec g;
  const SchemeParams p;
  const WaveState s = WaveState::at_rest(smooth_profile(g));
  Vector bad = Vector::Zero(g.n_interior);
  bad(7) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(step(s, g, p, Direction::forward, bad), NumericalError);
  Matrix cols = Matrix::Zero(2 * g.n_interior, 2);
  cols(3, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(step_stacked(cols, g, p, Direction::backward), NumericalError);
}
