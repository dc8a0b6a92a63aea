// SPDX-License-Identifier: Apache-2.0

#include "pebble/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pebble/errors.hpp"
#include "pebble/rng.hpp"

namespace pebble::env {
namespace {

constexpr double kDt = 0.05;
constexpr double kPointMassDamping = 0.95;
constexpr double kPointMassMaxSpeed = 0.3;
constexpr double kPendulumGravityTerm = 15.0;
constexpr double kPendulumTorqueTerm = 3.0;
constexpr double kPendulumMaxSpeed = 8.0;
constexpr double kPendulumMaxTorque = 2.0;
constexpr double kPendulumRewardScale = 17.0;

const EnvSpec kPointMassSpec{EnvId::kPointMass2d, "pointmass2d", 4, 2, 100};
const EnvSpec kPendulumSpec{EnvId::kPendulum, "pendulum", 3, 1, 200};

double clip_unit(double a) { return std::clamp(a, -1.0, 1.0); }

double wrap_angle(double th) {
  return std::remainder(th, 2.0 * std::numbers::pi);
}

struct PointMassNext {
  double x, y, vx, vy;
};

PointMassNext pointmass_dynamics(std::span<const double> obs,
                                 std::span<const double> action) {
  double vx = kPointMassDamping * obs[2] + clip_unit(action[0]) * kDt;
  double vy = kPointMassDamping * obs[3] + clip_unit(action[1]) * kDt;
  const double speed = std::hypot(vx, vy);
  if (speed > kPointMassMaxSpeed) {
    vx *= kPointMassMaxSpeed / speed;
    vy *= kPointMassMaxSpeed / speed;
  }
  return {std::clamp(obs[0] + vx * kDt, -1.0, 1.0),
          std::clamp(obs[1] + vy * kDt, -1.0, 1.0), vx, vy};
}

double pointmass_reward(double x, double y) {
  const double dx = x - kPointMassGoalX;
  const double dy = y - kPointMassGoalY;
  return std::exp(-4.0 * (dx * dx + dy * dy));
}

double pendulum_reward(double th, double thdot, double u) {
  const double w = wrap_angle(th);
  return -(w * w + 0.1 * thdot * thdot + 0.001 * u * u) / kPendulumRewardScale;
}

void check_dims(EnvId id, std::span<const double> obs, std::span<const double> action) {
  const EnvSpec& spec = env_spec(id);
  if (obs.size() != spec.obs_dim || action.size() != spec.action_dim) {
    throw ContractError("env: dimension mismatch for " + spec.name);
  }
}

}  // namespace

const EnvSpec& env_spec(EnvId id) {
  return id == EnvId::kPendulum ? kPendulumSpec : kPointMassSpec;
}

EnvId env_from_name(const std::string& name) {
  if (name == kPointMassSpec.name) return EnvId::kPointMass2d;
  if (name == kPendulumSpec.name) return EnvId::kPendulum;
  throw ContractError("unknown env_id: " + name);
}

std::string env_name(EnvId id) { return env_spec(id).name; }

EnvState reset(EnvId id, std::uint64_t seed) {
  Rng rng(seed);
  EnvState s;
  if (id == EnvId::kPointMass2d) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    s.observation = {x, y, 0.0, 0.0};
  } else {
    const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double thdot = rng.uniform(-1.0, 1.0);
    s.observation = {std::cos(th), std::sin(th), thdot};
  }
  return s;
}

StepResult step(EnvId id, const EnvState& state, std::span<const double> action) {
  const EnvSpec& spec = env_spec(id);
  check_dims(id, state.observation, action);
  if (state.step_index >= spec.episode_length) {
    throw ContractError("env: step after episode end");
  }
  StepResult r;
  r.next_state.step_index = state.step_index + 1;
  r.done = r.next_state.step_index >= spec.episode_length;
  const auto& obs = state.observation;
  if (id == EnvId::kPointMass2d) {
    const PointMassNext n = pointmass_dynamics(obs, action);
    r.next_state.observation = {n.x, n.y, n.vx, n.vy};
    r.true_reward = pointmass_reward(n.x, n.y);
  } else {
    const double th = std::atan2(obs[1], obs[0]);
    const double thdot = obs[2];
    const double u = kPendulumMaxTorque * clip_unit(action[0]);
    r.true_reward = pendulum_reward(th, thdot, u);
    const double acc = kPendulumGravityTerm * std::sin(th) + kPendulumTorqueTerm * u;
    const double new_thdot =
        std::clamp(thdot + acc * kDt, -kPendulumMaxSpeed, kPendulumMaxSpeed);
    const double new_th = th + new_thdot * kDt;
    r.next_state.observation = {std::cos(new_th), std::sin(new_th), new_thdot};
  }
  return r;
}

double true_reward(EnvId id, std::span<const double> observation,
                   std::span<const double> action) {
  check_dims(id, observation, action);
  if (id == EnvId::kPointMass2d) {
    const PointMassNext n = pointmass_dynamics(observation, action);
    return pointmass_reward(n.x, n.y);
  }
  const double th = std::atan2(observation[1], observation[0]);
  return pendulum_reward(th, observation[2], kPendulumMaxTorque * clip_unit(action[0]));
}

void EpisodeCursor::start_next() {
  ++episode;
  const std::uint64_t mixed =
      (seed + 0x9E3779B97F4A7C15ULL) * 0xBF58476D1CE4E5B9ULL ^ static_cast<std::uint64_t>(episode);
  state = reset(id, mixed);
}

double canvas_x(double world_x) {
  return (std::clamp(world_x, -kWorldExtent, kWorldExtent) + kWorldExtent) /
         (2.0 * kWorldExtent) * kCanvasSize;
}

double canvas_y(double world_y) {
  return (kWorldExtent - std::clamp(world_y, -kWorldExtent, kWorldExtent)) /
         (2.0 * kWorldExtent) * kCanvasSize;
}

std::vector<FrameDescriptor> render_segment(EnvId id, const nn::Matrix& observations) {
  std::vector<FrameDescriptor> frames;
  frames.reserve(observations.rows);
  const double px_per_unit = kCanvasSize / (2.0 * kWorldExtent);
  for (std::size_t t = 0; t < observations.rows; ++t) {
    const auto obs = observations.row(t);
    FrameDescriptor f;
    f.t = static_cast<int>(t);
    if (id == EnvId::kPointMass2d) {
      Shape goal;
      goal.kind = Shape::Kind::kCircle;
      goal.x0 = canvas_x(kPointMassGoalX);
      goal.y0 = canvas_y(kPointMassGoalY);
      goal.radius = 0.1 * px_per_unit;
      goal.color = "#2ca02c";
      Shape agent;
      agent.kind = Shape::Kind::kCircle;
      agent.x0 = canvas_x(obs[0]);
      agent.y0 = canvas_y(obs[1]);
      agent.radius = 0.05 * px_per_unit;
      agent.color = "#1f77b4";
      f.shapes = {goal, agent};
    } else {
      const double th = std::atan2(obs[1], obs[0]);
      const double bob_x = std::sin(th) * kPendulumRodLength;
      const double bob_y = std::cos(th) * kPendulumRodLength;
      Shape rod;
      rod.kind = Shape::Kind::kLine;
      rod.x0 = canvas_x(0.0);
      rod.y0 = canvas_y(0.0);
      rod.x1 = canvas_x(bob_x);
      rod.y1 = canvas_y(bob_y);
      rod.width = 4.0;
      rod.color = "#444444";
      Shape pivot;
      pivot.kind = Shape::Kind::kCircle;
      pivot.x0 = canvas_x(0.0);
      pivot.y0 = canvas_y(0.0);
      pivot.radius = 4.0;
      pivot.color = "#000000";
      Shape bob;
      bob.kind = Shape::Kind::kCircle;
      bob.x0 = rod.x1;
      bob.y0 = rod.y1;
      bob.radius = 0.08 * px_per_unit;
      bob.color = "#d62728";
      f.shapes = {rod, pivot, bob};
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace pebble::env
