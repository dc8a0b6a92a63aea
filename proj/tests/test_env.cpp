// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pebble/env.hpp"
#include "pebble/errors.hpp"
#include "pebble/rng.hpp"

namespace pebble::env {
namespace {

TEST(Reset, PointMassContract) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const EnvState s = reset(EnvId::kPointMass2d, seed);
    ASSERT_EQ(s.observation.size(), 4u);
    EXPECT_GE(s.observation[0], -1.0);
    EXPECT_LE(s.observation[0], 1.0);
    EXPECT_GE(s.observation[1], -1.0);
    EXPECT_LE(s.observation[1], 1.0);
    EXPECT_EQ(s.observation[2], 0.0);
    EXPECT_EQ(s.observation[3], 0.0);
    EXPECT_EQ(s.step_index, 0);
  }
}

TEST(Reset, PendulumContract) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const EnvState s = reset(EnvId::kPendulum, seed);
    ASSERT_EQ(s.observation.size(), 3u);
    EXPECT_NEAR(s.observation[0] * s.observation[0] + s.observation[1] * s.observation[1],
                1.0, 1e-12);
    EXPECT_GE(s.observation[2], -1.0);
    EXPECT_LE(s.observation[2], 1.0);
  }
}

TEST(Reset, SameSeedSameState) {
  for (EnvId id : {EnvId::kPointMass2d, EnvId::kPendulum}) {
    EXPECT_EQ(reset(id, 42).observation, reset(id, 42).observation);
    EXPECT_NE(reset(id, 42).observation, reset(id, 43).observation);
  }
}

TEST(Step, PointMassAtGoalEarnsOne) {
  EnvState s;
  s.observation = {kPointMassGoalX, kPointMassGoalY, 0.0, 0.0};
  const StepResult r = step(EnvId::kPointMass2d, s, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(r.true_reward, 1.0);
}

TEST(Step, PendulumUprightEquilibrium) {
  EnvState s;
  s.observation = {1.0, 0.0, 0.0};
  const StepResult r = step(EnvId::kPendulum, s, std::vector<double>{0.0});
  EXPECT_EQ(r.true_reward, 0.0);
  EXPECT_EQ(r.next_state.observation, s.observation);
}

TEST(Step, PointMassHandEvaluatedDynamics) {
  // v' = 0.95 * 0 + 1 * 0.05, x' = 0 + 0.05 * 0.05.
  EnvState s;
  s.observation = {0.0, 0.0, 0.0, 0.0};
  const StepResult r = step(EnvId::kPointMass2d, s, std::vector<double>{1.0, 0.0});
  EXPECT_NEAR(r.next_state.observation[0], 0.0025, 1e-15);
  EXPECT_EQ(r.next_state.observation[1], 0.0);
  EXPECT_NEAR(r.next_state.observation[2], 0.05, 1e-15);
  EXPECT_EQ(r.next_state.observation[3], 0.0);
  EXPECT_NEAR(r.true_reward, std::exp(-4.0 * ((0.0025 - 0.8) * (0.0025 - 0.8) + 0.64)), 1e-15);
}

TEST(Step, PointMassSpeedCapAndWalls) {
  EnvState s;
  s.observation = {0.999, 0.0, 0.29, 0.29};
  const StepResult r = step(EnvId::kPointMass2d, s, std::vector<double>{5.0, 5.0});
  EXPECT_NEAR(std::hypot(r.next_state.observation[2], r.next_state.observation[3]), 0.3, 1e-12);
  EXPECT_EQ(r.next_state.observation[0], 1.0);
}

TEST(Step, PendulumHandEvaluatedDynamics) {
  const double th = 0.4, thdot = -0.7, a = 0.5;
  EnvState s;
  s.observation = {std::cos(th), std::sin(th), thdot};
  const StepResult r = step(EnvId::kPendulum, s, std::vector<double>{a});
  const double u = 2.0 * a;
  const double nthdot = thdot + (15.0 * std::sin(th) + 3.0 * u) * 0.05;
  const double nth = th + nthdot * 0.05;
  EXPECT_NEAR(r.next_state.observation[0], std::cos(nth), 1e-14);
  EXPECT_NEAR(r.next_state.observation[1], std::sin(nth), 1e-14);
  EXPECT_NEAR(r.next_state.observation[2], nthdot, 1e-14);
  EXPECT_NEAR(r.true_reward, -(th * th + 0.1 * thdot * thdot + 0.001 * u * u) / 17.0, 1e-15);
}

TEST(Step, TrueRewardMatchesStep) {
  Rng rng(4);
  for (EnvId id : {EnvId::kPointMass2d, EnvId::kPendulum}) {
    EnvState s = reset(id, 9);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> a(env_spec(id).action_dim);
      for (double& v : a) v = rng.uniform(-1.5, 1.5);
      const StepResult r = step(id, s, a);
      EXPECT_EQ(true_reward(id, s.observation, a), r.true_reward);
      s = r.next_state;
    }
  }
}

TEST(Step, DimensionMismatchAndPastEndAreContractErrors) {
  EnvState s = reset(EnvId::kPointMass2d, 0);
  EXPECT_THROW(step(EnvId::kPointMass2d, s, std::vector<double>{0.0}), ContractError);
  s.step_index = 100;
  EXPECT_THROW(step(EnvId::kPointMass2d, s, std::vector<double>{0.0, 0.0}), ContractError);
  EXPECT_THROW(env_from_name("cartpole"), ContractError);
}

// Property suite: purity, reward bounds, exact episode lengths.
TEST(EnvProperties, DeterministicBoundedExactLength) {
  Rng rng(17);
  for (EnvId id : {EnvId::kPointMass2d, EnvId::kPendulum}) {
    const EnvSpec& spec = env_spec(id);
    for (std::uint64_t ep = 0; ep < 20; ++ep) {
      EnvState s = reset(id, ep);
      int steps = 0;
      bool done = false;
      while (!done) {
        std::vector<double> a(spec.action_dim);
        for (double& v : a) v = rng.uniform(-1.0, 1.0);
        const StepResult r1 = step(id, s, a);
        const StepResult r2 = step(id, s, a);
        ASSERT_EQ(r1.next_state.observation, r2.next_state.observation);
        ASSERT_EQ(r1.true_reward, r2.true_reward);
        if (id == EnvId::kPointMass2d) {
          ASSERT_GT(r1.true_reward, 0.0);
          ASSERT_LE(r1.true_reward, 1.0);
        } else {
          ASSERT_GE(r1.true_reward, -1.0);
          ASSERT_LE(r1.true_reward, 0.0);
        }
        ++steps;
        done = r1.done;
        ASSERT_EQ(done, steps == spec.episode_length);
        s = r1.next_state;
      }
      EXPECT_EQ(steps, spec.episode_length);
    }
  }
}

TEST(EnvProperties, PendulumWorstCaseRewardStaysInRange) {
  // Pointing down at full speed with full torque is the minimum.
  const double r = true_reward(EnvId::kPendulum, std::vector<double>{-1.0, 0.0, 8.0},
                               std::vector<double>{1.0});
  EXPECT_GE(r, -1.0);
  EXPECT_NEAR(r, -(std::numbers::pi * std::numbers::pi + 6.4 + 0.004) / 17.0, 1e-12);
}

TEST(Cursor, EpisodesAreReproducibleAndDistinct) {
  EpisodeCursor a{EnvId::kPendulum, 5, -1, {}};
  EpisodeCursor b{EnvId::kPendulum, 5, -1, {}};
  a.start_next();
  b.start_next();
  EXPECT_EQ(a.state.observation, b.state.observation);
  const auto first = a.state.observation;
  a.start_next();
  EXPECT_EQ(a.episode, 1);
  EXPECT_NE(a.state.observation, first);
}

TEST(Render, EmptySegmentGivesNoFrames) {
  EXPECT_TRUE(render_segment(EnvId::kPointMass2d, nn::Matrix(0, 4)).empty());
}

TEST(Render, PointMassFramesHoldAgentAndGoal) {
  nn::Matrix obs(10, 4);
  for (std::size_t t = 0; t < 10; ++t) obs.at(t, 0) = -1.0 + 0.1 * static_cast<double>(t);
  const auto frames = render_segment(EnvId::kPointMass2d, obs);
  ASSERT_EQ(frames.size(), 10u);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_EQ(frames[t].t, static_cast<int>(t));
    ASSERT_EQ(frames[t].shapes.size(), 2u);
    for (const Shape& sh : frames[t].shapes) EXPECT_EQ(sh.kind, Shape::Kind::kCircle);
    EXPECT_DOUBLE_EQ(frames[t].shapes[0].x0, canvas_x(kPointMassGoalX));
    EXPECT_DOUBLE_EQ(frames[t].shapes[1].x0, canvas_x(obs.at(t, 0)));
  }
}

TEST(Render, PendulumRodPointsAtBob) {
  nn::Matrix obs(1, 3);
  obs.at(0, 0) = 1.0;  // upright
  const auto frames = render_segment(EnvId::kPendulum, obs);
  ASSERT_EQ(frames.size(), 1u);
  const Shape& rod = frames[0].shapes.at(0);
  EXPECT_EQ(rod.kind, Shape::Kind::kLine);
  EXPECT_DOUBLE_EQ(rod.x1, canvas_x(0.0));
  EXPECT_DOUBLE_EQ(rod.y1, canvas_y(1.0));
  EXPECT_LT(rod.y1, rod.y0);  // canvas y grows downward
}

TEST(Render, CanvasMapping) {
  EXPECT_DOUBLE_EQ(canvas_x(-kWorldExtent), 0.0);
  EXPECT_DOUBLE_EQ(canvas_x(kWorldExtent), kCanvasSize);
  EXPECT_DOUBLE_EQ(canvas_y(kWorldExtent), 0.0);
  EXPECT_DOUBLE_EQ(canvas_y(0.0), kCanvasSize / 2.0);
}

}  // namespace
}  // namespace pebble::env
