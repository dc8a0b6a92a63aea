// SPDX-License-Identifier: Apache-2.0

#include "pebble/teacher.hpp"

#include "pebble/errors.hpp"

namespace pebble::teacher {

double true_segment_return(env::EnvId id, const replay::Segment& seg) {
  double total = 0.0;
  for (std::size_t t = 0; t < seg.length(); ++t) {
    total += env::true_reward(id, seg.states.row(t), seg.actions.row(t));
  }
  return total;
}

reward::Label scripted_label(env::EnvId id, const replay::Segment& seg0,
                             const replay::Segment& seg1, double eps) {
  if (seg0.length() != seg1.length()) {
    throw ContractError("scripted_label: segments differ in length");
  }
  const double r0 = true_segment_return(id, seg0);
  const double r1 = true_segment_return(id, seg1);
  if (r1 > r0 + eps) return reward::kPreferSecond;
  if (r0 > r1 + eps) return reward::kPreferFirst;
  return reward::kIndifferent;
}

Choice choice_from_string(const std::string& s) {
  if (s == "left") return Choice::kLeft;
  if (s == "right") return Choice::kRight;
  if (s == "equal") return Choice::kEqual;
  if (s == "skip") return Choice::kSkip;
  throw ContractError("unknown choice: " + s);
}

std::optional<reward::Label> label_for(Choice c) {
  switch (c) {
    case Choice::kLeft: return reward::kPreferFirst;
    case Choice::kRight: return reward::kPreferSecond;
    case Choice::kEqual: return reward::kIndifferent;
    case Choice::kSkip: return std::nullopt;
  }
  return std::nullopt;
}

double unix_now() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

std::uint64_t QueryQueue::enqueue(std::vector<env::FrameDescriptor> clip0,
                                  std::vector<env::FrameDescriptor> clip1, int fps, bool held) {
  std::lock_guard lock(mu_);
  PendingQuery q;
  q.id = next_id_++;
  q.clip0 = std::move(clip0);
  q.clip1 = std::move(clip1);
  q.fps = fps;
  q.created_at = unix_now();
  const std::uint64_t id = q.id;
  items_.emplace(id, std::move(q));
  if (held) held_.insert(id);
  return id;
}

std::optional<PendingQuery> QueryQueue::next_pending() const {
  std::lock_guard lock(mu_);
  for (const auto& [id, q] : items_) {
    if (q.state == QueryState::kPending && !held_.contains(id)) return q;
  }
  return std::nullopt;
}

std::optional<PendingQuery> QueryQueue::find(std::uint64_t id) const {
  std::lock_guard lock(mu_);
  const auto it = items_.find(id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

SubmitResult QueryQueue::submit(std::uint64_t id, Choice choice) {
  {
    std::lock_guard lock(mu_);
    const auto it = items_.find(id);
    if (it == items_.end() || held_.contains(id)) return SubmitResult::kUnknownId;
    PendingQuery& q = it->second;
    if (q.state != QueryState::kPending) return SubmitResult::kAlreadyAnswered;
    q.label = label_for(choice);
    q.state = q.label ? QueryState::kAnswered : QueryState::kSkipped;
  }
  cv_.notify_all();
  return SubmitResult::kAccepted;
}

std::vector<SessionOutcome> QueryQueue::await_session_labels(
    const std::vector<std::uint64_t>& ids, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  for (std::uint64_t id : ids) {
    const auto it = items_.find(id);
    if (it == items_.end() || it->second.state != QueryState::kPending) {
      throw ContractError("await_session_labels: query " + std::to_string(id) +
                          " is not pending");
    }
  }
  for (std::uint64_t id : ids) held_.erase(id);
  const auto all_resolved = [&] {
    for (std::uint64_t id : ids) {
      if (items_.at(id).state == QueryState::kPending) return false;
    }
    return true;
  };
  cv_.wait_for(lock, timeout, all_resolved);
  std::vector<SessionOutcome> out;
  out.reserve(ids.size());
  for (std::uint64_t id : ids) {
    PendingQuery& q = items_.at(id);
    if (q.state == QueryState::kPending) q.state = QueryState::kSkipped;
    out.push_back(SessionOutcome{id, q.state == QueryState::kAnswered ? q.label : std::nullopt});
  }
  return out;
}

QueryQueue::Counts QueryQueue::counts() const {
  std::lock_guard lock(mu_);
  Counts c;
  c.enqueued = items_.size();
  for (const auto& [id, q] : items_) {
    switch (q.state) {
      case QueryState::kPending: ++c.pending; break;
      case QueryState::kAnswered: ++c.answered; break;
      case QueryState::kSkipped: ++c.skipped; break;
    }
  }
  return c;
}

std::vector<std::uint64_t> enqueue_queries(QueryQueue& queue,
                                           const std::vector<query::QueryCandidate>& selected,
                                           env::EnvId id) {
  std::vector<std::uint64_t> ids;
  ids.reserve(selected.size());
  for (const auto& c : selected) {
    const int fps = static_cast<int>(c.seg0.length());
    ids.push_back(queue.enqueue(env::render_segment(id, c.seg0.states),
                                env::render_segment(id, c.seg1.states), fps, true));
  }
  return ids;
}

}  // namespace pebble::teacher
