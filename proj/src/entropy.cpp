// SPDX-License-Identifier: Apache-2.0

#include "pebble/entropy.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "pebble/errors.hpp"
#include "pebble/kernels.hpp"

namespace pebble::entropy {
namespace {

/// Keeps the k smallest squared distances seen so far, ascending. Strict
/// comparison keeps the earlier candidate on ties.
class KSmallest {
 public:
  explicit KSmallest(std::size_t k) : k_(k) { best_.reserve(k + 1); }

  void offer(std::span<const double> sq, std::size_t skip = static_cast<std::size_t>(-1)) {
    for (std::size_t j = 0; j < sq.size(); ++j) {
      if (j == skip) continue;
      const double v = sq[j];
      if (best_.size() == k_ && !(v < best_.back())) continue;
      auto pos = std::upper_bound(best_.begin(), best_.end(), v);
      best_.insert(pos, v);
      if (best_.size() > k_) best_.pop_back();
    }
  }

  std::size_t size() const { return best_.size(); }
  double kth() const { return best_.back(); }

 private:
  std::size_t k_;
  std::vector<double> best_;
};

}  // namespace

double knn_distance(std::span<const double> query, std::span<const double> points,
                    std::size_t k, std::optional<std::size_t> self_row) {
  const std::size_t dim = query.size();
  if (k == 0) throw ContractError("knn_distance: k must be positive");
  if (dim == 0 || points.size() % dim != 0) throw ContractError("knn_distance: bad shapes");
  const std::size_t n = points.size() / dim;
  if (self_row && *self_row >= n) throw ContractError("knn_distance: self_row out of range");
  const std::size_t candidates = self_row ? n - 1 : n;
  if (candidates < k) {
    throw ContractError("knn_distance: need at least k=" + std::to_string(k) +
                        " candidates, have " + std::to_string(candidates));
  }
  std::vector<double> sq(n);
  kernels::squared_distances(query, points, sq);
  KSmallest best(k);
  best.offer(sq, self_row.value_or(static_cast<std::size_t>(-1)));
  return std::sqrt(best.kth());
}

double knn_distance(std::span<const double> query, const replay::ReplayBuffer& buffer,
                    std::size_t k) {
  if (k == 0) throw ContractError("knn_distance: k must be positive");
  if (query.size() != buffer.state_dim()) throw ContractError("knn_distance: dimension mismatch");
  if (buffer.size() < k) {
    throw ContractError("knn_distance: need at least k=" + std::to_string(k) +
                        " candidates, have " + std::to_string(buffer.size()));
  }
  KSmallest best(k);
  std::vector<double> sq;
  buffer.for_each_state_block([&](std::size_t, std::span<const double> block) {
    sq.resize(block.size() / query.size());
    kernels::squared_distances(query, block, sq);
    best.offer(sq);
  });
  return std::sqrt(best.kth());
}

double EntropyEstimatorState::running_std() const {
  return count == 0 ? 0.0 : std::sqrt(m2 / static_cast<double>(count));
}

double normalize_intrinsic(double raw, EntropyEstimatorState& est) {
  ++est.count;
  const double delta = raw - est.mean;
  est.mean += delta / static_cast<double>(est.count);
  est.m2 += delta * (raw - est.mean);
  if (est.count < 2) return raw;
  return raw / std::max(est.running_std(), kStdFloor);
}

double intrinsic_reward(std::span<const double> state, const replay::ReplayBuffer& buffer,
                        EntropyEstimatorState& est) {
  if (buffer.size() <= est.k) return 0.0;
  const double d = knn_distance(state, buffer, est.k);
  return normalize_intrinsic(std::log(std::max(d, est.distance_floor)), est);
}

double entropy_estimate(const nn::Matrix& points, std::size_t k, double distance_floor) {
  const std::size_t n = points.rows;
  const std::size_t q = points.cols;
  if (q == 0) throw ContractError("entropy_estimate: zero dimension");
  if (k == 0 || n <= k) throw ContractError("entropy_estimate: need N > k");
  const double dq = static_cast<double>(q);
  const double log_volume =
      0.5 * dq * std::log(std::numbers::pi) - std::lgamma(0.5 * dq + 1.0);
  const double log_n_over_k = std::log(static_cast<double>(n)) - std::log(static_cast<double>(k));

  std::vector<double> sq(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    kernels::squared_distances(points.row(i), points.data, sq);
    KSmallest best(k);
    best.offer(sq, i);
    const double d = std::max(std::sqrt(best.kth()), distance_floor);
    acc += log_n_over_k + dq * std::log(d) + log_volume;
  }
  const double bias = std::log(static_cast<double>(k)) - boost::math::digamma(static_cast<double>(k));
  return acc / static_cast<double>(n) + bias;
}

ExploreStats explore_phase(env::EpisodeCursor& cursor, sac::SacAgent& agent,
                           replay::ReplayBuffer& buffer, EntropyEstimatorState& est,
                           const ExploreOptions& options, Rng& rng, const StepHook& on_step) {
  ExploreStats stats;
  if (options.steps <= 0) return stats;
  if (cursor.episode < 0) cursor.start_next();
  for (std::int64_t t = 0; t < options.steps; ++t) {
    const std::vector<double> action =
        sac::select_action(agent, cursor.state.observation, false, rng);
    const env::StepResult sr = env::step(cursor.id, cursor.state, action);
    replay::Transition tr;
    tr.state = cursor.state.observation;
    tr.action = action;
    tr.next_state = sr.next_state.observation;
    tr.stored_reward = intrinsic_reward(tr.state, buffer, est);
    tr.done = sr.done;
    tr.episode_id = cursor.episode;
    buffer.push(tr);
    ++stats.steps;
    if (sr.done) {
      cursor.start_next();
    } else {
      cursor.state = sr.next_state;
    }
    if (buffer.size() >= std::max(options.learning_starts, agent.config.batch_size)) {
      sac::sac_update(agent, buffer.sample_batch(agent.config.batch_size, rng), rng);
      ++stats.updates;
    }
    if (on_step) on_step(t + 1);
  }
  return stats;
}

}  // namespace pebble::entropy
