// SPDX-License-Identifier: Apache-2.0

#include "pebble/http_api.hpp"

#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "pebble/errors.hpp"

namespace pebble::api {

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << kCurveHeader << '\n';
  for (const auto& r : rows) {
    os << r.env_step << ',' << r.true_return << ',' << r.queries_used << '\n';
  }
  return os.str();
}

std::vector<CurveRow> parse_curve_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCurveHeader) {
    throw std::runtime_error("curve csv: bad header");
  }
  std::vector<CurveRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    CurveRow r;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> r.env_step >> c1 >> r.true_return >> c2 >> r.queries_used) || c1 != ',' ||
        c2 != ',') {
      throw std::runtime_error("curve csv: bad row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

json frame_to_json(const env::FrameDescriptor& frame) {
  json shapes = json::array();
  for (const auto& s : frame.shapes) {
    if (s.kind == env::Shape::Kind::kCircle) {
      shapes.push_back({{"kind", "circle"}, {"x", s.x0}, {"y", s.y0}, {"r", s.radius},
                        {"color", s.color}});
    } else {
      shapes.push_back({{"kind", "line"}, {"x0", s.x0}, {"y0", s.y0}, {"x1", s.x1},
                        {"y1", s.y1}, {"width", s.width}, {"color", s.color}});
    }
  }
  return {{"t", frame.t}, {"shapes", std::move(shapes)}};
}

json clip_to_json(const std::vector<env::FrameDescriptor>& clip) {
  json out = json::array();
  for (const auto& f : clip) out.push_back(frame_to_json(f));
  return out;
}

json status_to_json(const RunStatus& s) {
  return {{"run_id", s.run_id},
          {"env", s.env},
          {"phase", s.phase},
          {"env_steps", s.env_steps},
          {"queries_used", s.queries_used},
          {"budget", s.budget},
          {"latest_eval_return", s.latest_eval_return}};
}

void StatusBoard::publish(const RunStatus& status) {
  std::lock_guard lock(mu_);
  status_ = status;
}

void StatusBoard::append_curve(const CurveRow& row) {
  std::lock_guard lock(mu_);
  curve_.push_back(row);
}

RunStatus StatusBoard::status() const {
  std::lock_guard lock(mu_);
  return status_;
}

std::vector<CurveRow> StatusBoard::curve() const {
  std::lock_guard lock(mu_);
  return curve_;
}

namespace {

void send_error(httplib::Response& res, int code, const std::string& msg) {
  res.status = code;
  res.set_content(json{{"error", msg}}.dump(), "application/json");
}

}  // namespace

ApiServer::ApiServer(teacher::QueryQueue& queue, StatusBoard& board)
    : queue_(queue), board_(board), server_(std::make_unique<httplib::Server>()) {
  server_->Get("/api/queries/next", [this](const httplib::Request&, httplib::Response& res) {
    const auto q = queue_.next_pending();
    if (!q) {
      res.status = 204;
      return;
    }
    const json body = {{"query_id", q->id},
                       {"clip0", clip_to_json(q->clip0)},
                       {"clip1", clip_to_json(q->clip1)},
                       {"fps", q->fps}};
    res.set_content(body.dump(), "application/json");
  });

  server_->Post("/api/preferences", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      send_error(res, 400, "body is not valid JSON");
      return;
    }
    if (!body.is_object() || !body.contains("query_id") || !body.contains("choice") ||
        !body["query_id"].is_number_unsigned() || !body["choice"].is_string()) {
      send_error(res, 400, "expected {query_id: uint, choice: string}");
      return;
    }
    teacher::Choice choice;
    try {
      choice = teacher::choice_from_string(body["choice"].get<std::string>());
    } catch (const ContractError& e) {
      send_error(res, 400, e.what());
      return;
    }
    const auto id = body["query_id"].get<std::uint64_t>();
    switch (queue_.submit(id, choice)) {
      case teacher::SubmitResult::kAccepted:
        res.set_content(json{{"ok", true}}.dump(), "application/json");
        break;
      case teacher::SubmitResult::kUnknownId:
        send_error(res, 404, "unknown query_id");
        break;
      case teacher::SubmitResult::kAlreadyAnswered:
        send_error(res, 409, "query already answered");
        break;
    }
  });

  server_->Get("/api/status", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(status_to_json(board_.status()).dump(), "application/json");
  });

  server_->Get("/api/curve", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(curve_csv(board_.curve()), "text/csv");
  });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  if (thread_.joinable()) throw std::runtime_error("api server already running");
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace pebble::api
