// SPDX-License-Identifier: Apache-2.0
/**
 * @file   teacher.hpp
 * @brief  Label providers. The scripted teacher compares ground-truth segment
 *         returns; the human teacher is a query queue drained over HTTP.
 *
 * The queue is the only structure shared between the training thread and the
 * HTTP handlers. Every state change happens under its mutex, so
 * answered + skipped + pending == enqueued holds at every observation.
 */
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pebble/env.hpp"
#include "pebble/query.hpp"
#include "pebble/replay.hpp"
#include "pebble/reward_model.hpp"

namespace pebble::teacher {

double true_segment_return(env::EnvId id, const replay::Segment& seg);

/// (0,1) when seg1's true return beats seg0's by more than eps, (1,0) for the
/// reverse, (0.5,0.5) otherwise.
reward::Label scripted_label(env::EnvId id, const replay::Segment& seg0,
                             const replay::Segment& seg1, double eps = 0.0);

enum class QueryState { kPending, kAnswered, kSkipped };
enum class Choice { kLeft, kRight, kEqual, kSkip };

// Throws ContractError for anything but left/right/equal/skip.
Choice choice_from_string(const std::string& s);
// left -> (1,0), right -> (0,1), equal -> (0.5,0.5), skip -> none.
std::optional<reward::Label> label_for(Choice c);

struct PendingQuery {
  std::uint64_t id = 0;
  std::vector<env::FrameDescriptor> clip0;
  std::vector<env::FrameDescriptor> clip1;
  int fps = 0;
  double created_at = 0.0;
  QueryState state = QueryState::kPending;
  std::optional<reward::Label> label;
};

enum class SubmitResult { kAccepted, kUnknownId, kAlreadyAnswered };

struct SessionOutcome {
  std::uint64_t id = 0;
  std::optional<reward::Label> label;  // empty when skipped
};

class QueryQueue {
 public:
  // A held query stays invisible to next_pending and submit until it is awaited, so a
  // fast consumer cannot resolve it before the session starts waiting.
  std::uint64_t enqueue(std::vector<env::FrameDescriptor> clip0,
                        std::vector<env::FrameDescriptor> clip1, int fps, bool held = false);

  // Oldest pending query, if any.
  std::optional<PendingQuery> next_pending() const;
  std::optional<PendingQuery> find(std::uint64_t id) const;

  // A query accepts exactly one choice; later ones get kAlreadyAnswered.
  SubmitResult submit(std::uint64_t id, Choice choice);

  /// Releases any held ids, then blocks until every id is answered or skipped, or the
  /// timeout elapses; still-pending ids are then marked skipped. Outcomes follow `ids`
  /// order. Throws ContractError if an id is unknown or no longer pending on entry.
  std::vector<SessionOutcome> await_session_labels(const std::vector<std::uint64_t>& ids,
                                                   std::chrono::milliseconds timeout);

  struct Counts {
    std::size_t enqueued = 0;
    std::size_t pending = 0;
    std::size_t answered = 0;
    std::size_t skipped = 0;
  };
  Counts counts() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, PendingQuery> items_;
  std::set<std::uint64_t> held_;
  std::uint64_t next_id_ = 1;
};

/// One held pending query per candidate with both clips rendered at fps = H.
std::vector<std::uint64_t> enqueue_queries(QueryQueue& queue,
                                           const std::vector<query::QueryCandidate>& selected,
                                           env::EnvId id);

double unix_now();

}  // namespace pebble::teacher
