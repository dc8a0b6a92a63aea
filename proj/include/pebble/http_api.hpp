// SPDX-License-Identifier: Apache-2.0
/**
 * @file   http_api.hpp
 * @brief  JSON-over-HTTP surface for the labeling UI.
 *
 *   GET  /api/queries/next   200 {query_id, clip0, clip1, fps} or 204
 *   POST /api/preferences    {query_id, choice: left|right|equal|skip}
 *   GET  /api/status         run snapshot
 *   GET  /api/curve          curve.csv contents
 */
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pebble/env.hpp"
#include "pebble/teacher.hpp"

namespace httplib {
class Server;
}

namespace pebble::api {

using nlohmann::json;

struct RunStatus {
  std::string run_id;
  std::string env;
  std::string phase = "idle";
  std::int64_t env_steps = 0;
  std::int64_t queries_used = 0;
  std::int64_t budget = 0;
  double latest_eval_return = 0.0;
};

struct CurveRow {
  std::int64_t env_step = 0;
  double true_return = 0.0;
  std::int64_t queries_used = 0;
};

inline constexpr const char* kCurveHeader = "env_step,true_return,queries_used";

std::string curve_csv(const std::vector<CurveRow>& rows);
std::vector<CurveRow> parse_curve_csv(const std::string& text);

json frame_to_json(const env::FrameDescriptor& frame);
json clip_to_json(const std::vector<env::FrameDescriptor>& clip);
json status_to_json(const RunStatus& s);

/// Thread-safe holder for what the status and curve endpoints report.
class StatusBoard {
 public:
  void publish(const RunStatus& status);
  void append_curve(const CurveRow& row);
  RunStatus status() const;
  std::vector<CurveRow> curve() const;

 private:
  mutable std::mutex mu_;
  RunStatus status_;
  std::vector<CurveRow> curve_;
};

class ApiServer {
 public:
  ApiServer(teacher::QueryQueue& queue, StatusBoard& board);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and serves on a background thread. port 0 picks a free port.
  /// Returns the bound port; throws std::runtime_error if binding fails.
  int start(const std::string& host, int port);
  void stop();

 private:
  teacher::QueryQueue& queue_;
  StatusBoard& board_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace pebble::api
