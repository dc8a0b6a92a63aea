// SPDX-License-Identifier: Apache-2.0

#include "pebble/replay.hpp"

#include <algorithm>
#include <cmath>

#include "pebble/binio.hpp"
#include "pebble/errors.hpp"

namespace pebble::replay {
namespace {

constexpr std::array<char, 4> kMagic{'P', 'B', 'R', 'B'};
constexpr std::size_t kRelabelBlock = 1024;

void write_row(std::vector<double>& dst, std::size_t slot, std::span<const double> src) {
  const std::size_t w = src.size();
  if (dst.size() < (slot + 1) * w) dst.resize((slot + 1) * w);
  std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(slot * w));
}

template <typename T>
void write_scalar(std::vector<T>& dst, std::size_t slot, T value) {
  if (dst.size() < slot + 1) dst.resize(slot + 1);
  dst[slot] = value;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t state_dim, std::size_t action_dim,
                           std::size_t capacity)
    : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity) {
  if (state_dim == 0 || action_dim == 0 || capacity == 0) {
    throw ContractError("ReplayBuffer: dimensions and capacity must be positive");
  }
}

void ReplayBuffer::evict_for_one() {
  EpisodeSpan& oldest = episodes_.front();
  const bool oldest_is_open = episodes_.size() == 1 && !last_done_;
  if (oldest_is_open) {
    ++oldest.retained_seq;
    ++first_seq_;
  } else {
    first_seq_ = oldest.end_seq;
    episodes_.pop_front();
  }
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
      t.action.size() != action_dim_) {
    throw ContractError("ReplayBuffer::push: dimension mismatch");
  }
  if (!std::isfinite(t.stored_reward)) {
    throw ContractError("ReplayBuffer::push: non-finite reward");
  }
  while (size() >= capacity_) evict_for_one();

  const bool new_episode = episodes_.empty() || last_done_ || episodes_.back().id != t.episode_id;
  if (new_episode) {
    episodes_.push_back(EpisodeSpan{t.episode_id, next_seq_, next_seq_, next_seq_});
  }
  const std::size_t s = slot(next_seq_);
  write_row(states_, s, t.state);
  write_row(actions_, s, t.action);
  write_row(next_states_, s, t.next_state);
  write_scalar(rewards_, s, t.stored_reward);
  write_scalar<std::uint8_t>(dones_, s, t.done ? 1 : 0);
  write_scalar(episode_ids_, s, t.episode_id);
  ++next_seq_;
  episodes_.back().end_seq = next_seq_;
  last_done_ = t.done;
}

std::span<const double> ReplayBuffer::state(std::size_t i) const {
  return {states_.data() + slot(seq_of(i)) * state_dim_, state_dim_};
}

std::span<const double> ReplayBuffer::action(std::size_t i) const {
  return {actions_.data() + slot(seq_of(i)) * action_dim_, action_dim_};
}

double ReplayBuffer::reward(std::size_t i) const { return rewards_[slot(seq_of(i))]; }

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size()) throw ContractError("ReplayBuffer::at: index out of range");
  const std::size_t s = slot(seq_of(i));
  Transition t;
  const auto st = state(i);
  const auto ac = action(i);
  t.state.assign(st.begin(), st.end());
  t.action.assign(ac.begin(), ac.end());
  t.next_state.assign(next_states_.begin() + static_cast<std::ptrdiff_t>(s * state_dim_),
                      next_states_.begin() + static_cast<std::ptrdiff_t>((s + 1) * state_dim_));
  t.stored_reward = rewards_[s];
  t.done = dones_[s] != 0;
  t.episode_id = episode_ids_[s];
  return t;
}

Batch ReplayBuffer::sample_batch(std::size_t n, Rng& rng) const {
  Batch b;
  b.states = nn::Matrix(n, state_dim_);
  b.actions = nn::Matrix(n, action_dim_);
  b.next_states = nn::Matrix(n, state_dim_);
  b.rewards.resize(n);
  b.dones.resize(n);
  if (n == 0) return b;
  if (empty()) throw ContractError("ReplayBuffer::sample_batch: empty buffer");
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t s = slot(seq_of(rng.index(size())));
    std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>(s * state_dim_), state_dim_,
                b.states.row(j).begin());
    std::copy_n(actions_.begin() + static_cast<std::ptrdiff_t>(s * action_dim_), action_dim_,
                b.actions.row(j).begin());
    std::copy_n(next_states_.begin() + static_cast<std::ptrdiff_t>(s * state_dim_), state_dim_,
                b.next_states.row(j).begin());
    b.rewards[j] = rewards_[s];
    b.dones[j] = dones_[s] != 0 ? 1.0 : 0.0;
  }
  return b;
}

std::size_t ReplayBuffer::count_segment_windows(std::size_t h) const {
  if (h == 0) throw ContractError("segment length must be positive");
  std::size_t total = 0;
  for (const EpisodeSpan& ep : episodes_) {
    const std::size_t len = static_cast<std::size_t>(ep.end_seq - ep.retained_seq);
    if (len >= h) total += len - h + 1;
  }
  return total;
}

Segment ReplayBuffer::make_segment(const EpisodeSpan& ep, std::uint64_t start_seq,
                                   std::size_t h) const {
  Segment seg;
  seg.states = nn::Matrix(h, state_dim_);
  seg.actions = nn::Matrix(h, action_dim_);
  seg.episode_id = ep.id;
  seg.start = static_cast<std::size_t>(start_seq - ep.first_seq);
  for (std::size_t t = 0; t < h; ++t) {
    const std::size_t s = slot(start_seq + t);
    std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>(s * state_dim_), state_dim_,
                seg.states.row(t).begin());
    std::copy_n(actions_.begin() + static_cast<std::ptrdiff_t>(s * action_dim_), action_dim_,
                seg.actions.row(t).begin());
  }
  return seg;
}

Segment ReplayBuffer::segment_window(std::size_t h, std::size_t w) const {
  for (const EpisodeSpan& ep : episodes_) {
    const std::size_t len = static_cast<std::size_t>(ep.end_seq - ep.retained_seq);
    if (len < h) continue;
    const std::size_t windows = len - h + 1;
    if (w < windows) return make_segment(ep, ep.retained_seq + w, h);
    w -= windows;
  }
  throw NoValidSegment("segment window index out of range");
}

Segment ReplayBuffer::sample_segment(std::size_t h, Rng& rng) const {
  const std::size_t total = count_segment_windows(h);
  if (total == 0) {
    throw NoValidSegment("no stored episode has " + std::to_string(h) +
                         " contiguous steps");
  }
  return segment_window(h, rng.index(total));
}

std::size_t ReplayBuffer::relabel_all(const RewardFn& reward_fn) {
  const std::size_t n = size();
  std::vector<double> fresh(n);
  for (std::size_t begin = 0; begin < n; begin += kRelabelBlock) {
    const std::size_t count = std::min(kRelabelBlock, n - begin);
    nn::Matrix st(count, state_dim_);
    nn::Matrix ac(count, action_dim_);
    for (std::size_t j = 0; j < count; ++j) {
      const auto s = state(begin + j);
      const auto a = action(begin + j);
      std::copy(s.begin(), s.end(), st.row(j).begin());
      std::copy(a.begin(), a.end(), ac.row(j).begin());
    }
    const std::vector<double> r = reward_fn(st, ac);
    if (r.size() != count) throw ContractError("relabel_all: reward_fn returned wrong count");
    for (std::size_t j = 0; j < count; ++j) {
      if (!std::isfinite(r[j])) throw NumericError("relabel_all", r[j], begin + j);
      fresh[begin + j] = r[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) rewards_[slot(seq_of(i))] = fresh[i];
  return n;
}

std::optional<std::size_t> ReplayBuffer::first_label_mismatch(const RewardFn& reward_fn) const {
  const std::size_t n = size();
  for (std::size_t begin = 0; begin < n; begin += kRelabelBlock) {
    const std::size_t count = std::min(kRelabelBlock, n - begin);
    nn::Matrix st(count, state_dim_);
    nn::Matrix ac(count, action_dim_);
    for (std::size_t j = 0; j < count; ++j) {
      const auto s = state(begin + j);
      const auto a = action(begin + j);
      std::copy(s.begin(), s.end(), st.row(j).begin());
      std::copy(a.begin(), a.end(), ac.row(j).begin());
    }
    const std::vector<double> r = reward_fn(st, ac);
    for (std::size_t j = 0; j < count; ++j) {
      if (r[j] != reward(begin + j)) return begin + j;
    }
  }
  return std::nullopt;
}

void ReplayBuffer::for_each_state_block(
    const std::function<void(std::size_t, std::span<const double>)>& fn) const {
  const std::size_t n = size();
  if (n == 0) return;
  const std::size_t head = slot(first_seq_);
  const std::size_t first_len = std::min(n, capacity_ - head);
  fn(0, std::span<const double>(states_.data() + head * state_dim_, first_len * state_dim_));
  if (first_len < n) {
    fn(first_len, std::span<const double>(states_.data(), (n - first_len) * state_dim_));
  }
}

void ReplayBuffer::save(const std::filesystem::path& path) const {
  binio::Container c;
  c.magic = kMagic;
  c.dims = {state_dim_, action_dim_, capacity_};
  c.count = size();
  const std::size_t width = 2 * state_dim_ + action_dim_ + 3;
  c.body.reserve(size() * width);
  for (std::size_t i = 0; i < size(); ++i) {
    const Transition t = at(i);
    c.body.insert(c.body.end(), t.state.begin(), t.state.end());
    c.body.insert(c.body.end(), t.action.begin(), t.action.end());
    c.body.insert(c.body.end(), t.next_state.begin(), t.next_state.end());
    c.body.push_back(t.stored_reward);
    c.body.push_back(t.done ? 1.0 : 0.0);
    c.body.push_back(static_cast<double>(t.episode_id));
  }
  binio::write_container(path, c);
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path) {
  const binio::Container c = binio::read_container(path, kMagic);
  if (c.dims.size() != 3) throw std::runtime_error("replay snapshot: bad dims");
  const std::size_t sd = c.dims[0];
  const std::size_t ad = c.dims[1];
  ReplayBuffer buf(sd, ad, c.dims[2]);
  const std::size_t width = 2 * sd + ad + 3;
  if (c.body.size() != c.count * width) throw std::runtime_error("replay snapshot: truncated body");
  for (std::size_t i = 0; i < c.count; ++i) {
    const double* row = c.body.data() + i * width;
    Transition t;
    t.state.assign(row, row + sd);
    t.action.assign(row + sd, row + sd + ad);
    t.next_state.assign(row + sd + ad, row + 2 * sd + ad);
    t.stored_reward = row[2 * sd + ad];
    t.done = row[2 * sd + ad + 1] != 0.0;
    t.episode_id = static_cast<std::int64_t>(row[2 * sd + ad + 2]);
    buf.push(t);
  }
  return buf;
}

}  // namespace pebble::replay
