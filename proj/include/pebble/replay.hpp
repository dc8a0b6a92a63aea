// SPDX-License-Identifier: Apache-2.0
/**
 * @file   replay.hpp
 * @brief  Episode-aware replay buffer: uniform batch sampling, fixed-length
 *         segment extraction and whole-buffer reward relabeling.
 *
 * Transitions are addressed by a monotonically increasing sequence number;
 * slot = seq % capacity. At capacity the oldest whole episode is evicted. The
 * one exception is a buffer whose oldest episode is still being written,
 * which loses its front transition instead.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pebble/nn.hpp"
#include "pebble/rng.hpp"

namespace pebble::replay {

inline constexpr std::size_t kDefaultCapacity = 1'000'000;

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> next_state;
  double stored_reward = 0.0;
  bool done = false;
  std::int64_t episode_id = 0;
};

/// H contiguous (state, action) pairs from one episode.
struct Segment {
  nn::Matrix states;
  nn::Matrix actions;
  std::int64_t episode_id = 0;
  std::size_t start = 0;  // step offset inside the episode

  std::size_t length() const { return states.rows; }
};

struct Batch {
  nn::Matrix states;
  nn::Matrix actions;
  nn::Matrix next_states;
  std::vector<double> rewards;
  std::vector<double> dones;

  std::size_t size() const { return rewards.size(); }
};

/// Rewards for a block of (state, action) rows. Must be a pure function.
using RewardFn =
    std::function<std::vector<double>(const nn::Matrix& states, const nn::Matrix& actions)>;

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t state_dim, std::size_t action_dim,
               std::size_t capacity = kDefaultCapacity);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return static_cast<std::size_t>(next_seq_ - first_seq_); }
  bool empty() const { return size() == 0; }

  // Throws ContractError on dimension mismatch or a non-finite reward.
  void push(const Transition& t);

  // i = 0 is the oldest retained transition.
  Transition at(std::size_t i) const;
  std::span<const double> state(std::size_t i) const;
  std::span<const double> action(std::size_t i) const;
  double reward(std::size_t i) const;

  // Uniform with replacement. n = 0 yields an empty batch.
  Batch sample_batch(std::size_t n, Rng& rng) const;

  // Uniform over all (episode, start) windows of length h that lie inside
  // retained data. Throws NoValidSegment when none exists.
  Segment sample_segment(std::size_t h, Rng& rng) const;
  std::size_t count_segment_windows(std::size_t h) const;
  // The w-th window in episode order, w < count_segment_windows(h).
  Segment segment_window(std::size_t h, std::size_t w) const;

  // Replaces every stored reward with reward_fn(state, action). Returns the
  // number of entries touched. Throws NumericError carrying the logical index
  // of the first non-finite value; nothing is written in that case.
  std::size_t relabel_all(const RewardFn& reward_fn);

  // Logical index of the first stored reward that differs from reward_fn,
  // if any. Same block partitioning as relabel_all, so the comparison is
  // exact.
  std::optional<std::size_t> first_label_mismatch(const RewardFn& reward_fn) const;

  // Calls fn(offset, states_block) over all retained states in insertion
  // order; blocks are contiguous row-major state_dim-wide arrays.
  void for_each_state_block(
      const std::function<void(std::size_t, std::span<const double>)>& fn) const;

  std::size_t episode_count() const { return episodes_.size(); }

  void save(const std::filesystem::path& path) const;
  static ReplayBuffer load(const std::filesystem::path& path);

 private:
  struct EpisodeSpan {
    std::int64_t id = 0;
    std::uint64_t first_seq = 0;     // first sequence number ever written
    std::uint64_t retained_seq = 0;  // first sequence number still stored
    std::uint64_t end_seq = 0;       // one past the last written
  };

  std::size_t slot(std::uint64_t seq) const { return static_cast<std::size_t>(seq % capacity_); }
  std::uint64_t seq_of(std::size_t i) const { return first_seq_ + i; }
  void evict_for_one();
  Segment make_segment(const EpisodeSpan& ep, std::uint64_t start_seq, std::size_t h) const;

  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t capacity_;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> next_states_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> dones_;
  std::vector<std::int64_t> episode_ids_;
  std::uint64_t first_seq_ = 0;
  std::uint64_t next_seq_ = 0;
  std::deque<EpisodeSpan> episodes_;
  bool last_done_ = true;
};

}  // namespace pebble::replay
