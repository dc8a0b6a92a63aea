// SPDX-License-Identifier: Apache-2.0
/**
 * @file   entropy.hpp
 * @brief  Particle-based state entropy: exact k-NN distances, the full k-NN
 *         differential entropy estimator, the normalized log-distance
 *         intrinsic reward, and the unsupervised exploration loop that seeds
 *         the replay buffer and the policy.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "pebble/env.hpp"
#include "pebble/nn.hpp"
#include "pebble/replay.hpp"
#include "pebble/rng.hpp"
#include "pebble/sac.hpp"

namespace pebble::entropy {

inline constexpr std::size_t kDefaultK = 5;
inline constexpr double kDistanceFloor = 1e-6;
inline constexpr double kStdFloor = 1e-6;

/// Euclidean distance from `query` to its k-th nearest row of `points`
/// (row-major, query.size() wide). Ties resolve to the earlier row. When the
/// query is itself row `self_row` of the set, that row is not a candidate.
/// Throws ContractError when fewer than k candidates remain.
double knn_distance(std::span<const double> query, std::span<const double> points,
                    std::size_t k, std::optional<std::size_t> self_row = std::nullopt);

/// Same, over every state currently stored in the buffer.
double knn_distance(std::span<const double> query, const replay::ReplayBuffer& buffer,
                    std::size_t k);

struct EntropyEstimatorState {
  std::size_t k = kDefaultK;
  double distance_floor = kDistanceFloor;
  // Welford accumulators over raw intrinsic rewards (population variance).
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  double running_std() const;
};

/// Folds a raw reward into the running statistics and returns it divided by
/// the running standard deviation. With a single observation the spread is
/// undefined and the raw value is returned.
double normalize_intrinsic(double raw, EntropyEstimatorState& est);

/// log(max(d_k, floor)) of `state` against the buffer's states, normalized.
/// While the buffer holds k or fewer states this returns 0 and leaves the
/// statistics alone.
double intrinsic_reward(std::span<const double> state, const replay::ReplayBuffer& buffer,
                        EntropyEstimatorState& est);

/// k-NN differential entropy estimate in nats:
/// (1/N) sum_i log(N d_i^q pi^(q/2) / (k Gamma(q/2 + 1))) + log k - digamma(k),
/// d_i the distance from point i to its k-th nearest other point, floored.
double entropy_estimate(const nn::Matrix& points, std::size_t k,
                        double distance_floor = kDistanceFloor);

struct ExploreOptions {
  std::int64_t steps = 10'000;
  std::size_t learning_starts = 1'000;
};

struct ExploreStats {
  std::int64_t steps = 0;
  std::int64_t updates = 0;
};

/// Called after every environment step with the number of steps taken so far.
using StepHook = std::function<void(std::int64_t)>;

/// Collects `steps` transitions with the current policy, stores each with its
/// normalized intrinsic reward and runs one SAC update per step once the buffer
/// holds learning_starts transitions. Never reads the environment's reward.
ExploreStats explore_phase(env::EpisodeCursor& cursor, sac::SacAgent& agent,
                           replay::ReplayBuffer& buffer, EntropyEstimatorState& est,
                           const ExploreOptions& options, Rng& rng,
                           const StepHook& on_step = {});

}  // namespace pebble::entropy
