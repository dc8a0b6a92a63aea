// SPDX-License-Identifier: Apache-2.0
/**
 * @file   env.hpp
 * @brief  Built-in continuous-control tasks and their clip rendering.
 *
 * pointmass2d: observation (x, y, vx, vy). v' = 0.95 v + a dt with the speed
 *   clipped to 0.3, x' = clip(x + v' dt, [-1, 1]^2), dt = 0.05. The reward is
 *   exp(-4 |x' - g|^2) with g = (0.8, 0.8). 100 steps per episode.
 * pendulum: observation (cos th, sin th, thdot), th = 0 is upright.
 *   u = 2a, thdot' = clip(thdot + (15 sin th + 3u) dt, +-8), th' = th + thdot' dt,
 *   reward -(wrap(th)^2 + 0.1 thdot^2 + 0.001 u^2) / 17. 200 steps per episode.
 *
 * Episodes only end on the time limit. The true reward is for the scripted
 * teacher and the evaluator; agents see learned rewards only.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pebble/nn.hpp"

namespace pebble::env {

enum class EnvId { kPointMass2d, kPendulum };

struct EnvSpec {
  EnvId id;
  std::string name;
  std::size_t obs_dim;
  std::size_t action_dim;
  int episode_length;
};

const EnvSpec& env_spec(EnvId id);
// Throws ContractError for names other than pointmass2d / pendulum.
EnvId env_from_name(const std::string& name);
std::string env_name(EnvId id);

struct EnvState {
  std::vector<double> observation;
  int step_index = 0;
};

struct StepResult {
  EnvState next_state;
  double true_reward = 0.0;
  bool done = false;
};

EnvState reset(EnvId id, std::uint64_t seed);

// Actions outside [-1, 1] are clipped. Throws ContractError once the episode
// is over or when dimensions do not match.
StepResult step(EnvId id, const EnvState& state, std::span<const double> action);

/// Ground-truth reward of taking `action` from `observation`; identical to
/// step(...).true_reward. Used by the scripted teacher.
double true_reward(EnvId id, std::span<const double> observation,
                   std::span<const double> action);

/// Walks consecutive episodes of one environment. Episode e of a cursor with
/// seed s resets with a seed derived from (s, e), so runs are reproducible.
struct EpisodeCursor {
  EnvId id = EnvId::kPointMass2d;
  std::uint64_t seed = 0;
  std::int64_t episode = -1;
  EnvState state;

  void start_next();
};

inline constexpr double kPointMassGoalX = 0.8;
inline constexpr double kPointMassGoalY = 0.8;

// ---- rendering ------------------------------------------------------------

inline constexpr double kCanvasSize = 256.0;
inline constexpr double kWorldExtent = 1.25;  // world box [-1.25, 1.25]^2
inline constexpr double kPendulumRodLength = 1.0;

struct Shape {
  enum class Kind { kCircle, kLine };
  Kind kind = Kind::kCircle;
  // circle: (x0, y0) centre and radius; line: (x0, y0) -> (x1, y1) with width.
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double radius = 0.0;
  double width = 0.0;
  std::string color;
};

struct FrameDescriptor {
  int t = 0;
  std::vector<Shape> shapes;
};

// World coordinates to canvas pixels (y axis pointing down).
double canvas_x(double world_x);
double canvas_y(double world_y);

/// One frame per row of `observations`. Clips play at H frames per second so
/// every clip lasts one second.
std::vector<FrameDescriptor> render_segment(EnvId id, const nn::Matrix& observations);

}  // namespace pebble::env
