// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "pebble/errors.hpp"
#include "pebble/run.hpp"

namespace pebble::run {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory named after the running test.
fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir =
      fs::temp_directory_path() / (std::string("pebble_") + info->test_suite_name() + "_" + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

RunConfig tiny(const fs::path& out = {}) {
  RunConfig c;
  c.env = "pointmass2d";
  c.seed = 5;
  c.total_steps = 1000;
  c.pretrain_steps = 200;
  c.learning_starts = 100;
  c.feedback_interval = 200;
  c.queries_per_session = 10;
  c.budget = 40;
  c.eval_interval = 200;
  c.eval_episodes = 2;
  c.sac.hidden = {16, 16};
  c.sac.batch_size = 32;
  c.reward.hidden = {16, 16};
  c.reward.max_epochs = 5;
  c.output_dir = out.string();
  return c;
}

std::vector<std::int64_t> queries_column(const RunRecord& r) {
  std::vector<std::int64_t> q;
  for (const auto& row : r.curve) q.push_back(row.queries_used);
  return q;
}

TEST(Schedule, LastSessionTakesTheRemainingBudget) {
  RunConfig c = tiny();
  c.pretrain_steps = 0;
  c.budget = 100;
  c.queries_per_session = 40;
  const RunRecord r = run_pebble(c);
  EXPECT_EQ(r.sessions, 3);
  EXPECT_EQ(r.queries_used, 100);
  EXPECT_EQ(r.labeled_queries, 100);
  EXPECT_EQ(queries_column(r), (std::vector<std::int64_t>{40, 80, 100, 100, 100}));
}

TEST(Schedule, OneSessionPerIntervalWhileBudgetLasts) {
  RunConfig c = tiny();
  c.pretrain_steps = 0;
  c.budget = 10'000;
  c.queries_per_session = 20;
  const RunRecord r = run_pebble(c);
  EXPECT_EQ(r.sessions, 5);
  EXPECT_EQ(r.queries_used, 100);
}

TEST(Schedule, ZeroBudgetNeverAsks) {
  const fs::path out = scratch();
  RunConfig c = tiny(out);
  c.budget = 0;
  const RunRecord r = run_pebble(c);
  EXPECT_EQ(r.sessions, 0);
  EXPECT_EQ(r.queries_used, 0);
  EXPECT_EQ(line_count(r.run_dir / "preferences.jsonl"), 0u);
  EXPECT_EQ(r.curve.size(), 5u);
}

TEST(Schedule, SessionsStartAfterPretraining) {
  RunConfig c = tiny();
  c.budget = 1000;
  const RunRecord r = run_pebble(c);
  // Pre-training covers the first row; policy steps 0, 200, 400, 600 get sessions.
  EXPECT_EQ(queries_column(r), (std::vector<std::int64_t>{0, 10, 20, 30, 40}));
  EXPECT_EQ(r.sessions, 4);
}

TEST(RunDir, LayoutAndCurveFile) {
  const fs::path out = scratch();
  RunConfig c = tiny(out);
  c.verify_relabel = true;
  const RunRecord r = run_pebble(c);
  ASSERT_FALSE(r.run_dir.empty());
  EXPECT_TRUE(fs::exists(r.run_dir / "config.json"));
  EXPECT_TRUE(fs::exists(r.run_dir / "checkpoints" / "agent.bin"));
  EXPECT_TRUE(fs::exists(r.run_dir / "checkpoints" / "reward.bin"));
  EXPECT_FALSE(fs::exists(r.run_dir / "FAILED"));

  const auto rows = api::parse_curve_csv(slurp(r.run_dir / "curve.csv"));
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(c.total_steps / c.eval_interval));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].env_step, static_cast<std::int64_t>(i + 1) * c.eval_interval);
    EXPECT_NEAR(rows[i].true_return, r.curve[i].true_return, 1e-8);
  }
  EXPECT_EQ(line_count(r.run_dir / "preferences.jsonl"),
            static_cast<std::size_t>(r.labeled_queries));
  EXPECT_EQ(reward::load_records(r.run_dir / "preferences.jsonl").size(), 40u);
  EXPECT_EQ(r.relabel_failures, 0);

  const RunConfig back = load_config(r.run_dir / "config.json");
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(RunDir, CurveRowsForOtherIntervals) {
  for (std::int64_t interval : {100, 300, 1000}) {
    RunConfig c = tiny();
    c.eval_interval = interval;
    EXPECT_EQ(run_pebble(c).curve.size(), static_cast<std::size_t>(1000 / interval));
  }
}

TEST(Determinism, SameSeedSameCurveBytes) {
  const fs::path out = scratch();
  const RunConfig c = tiny(out / "a");
  RunConfig d = c;
  d.output_dir = (out / "b").string();
  const RunRecord a = run_pebble(c), b = run_pebble(d);
  EXPECT_EQ(slurp(a.run_dir / "curve.csv"), slurp(b.run_dir / "curve.csv"));
  EXPECT_EQ(slurp(a.run_dir / "checkpoints" / "agent.bin"),
            slurp(b.run_dir / "checkpoints" / "agent.bin"));

  RunConfig e = c;
  e.seed = 6;
  e.output_dir = (out / "c").string();
  EXPECT_NE(slurp(a.run_dir / "curve.csv"), slurp(run_pebble(e).run_dir / "curve.csv"));
}

TEST(Determinism, OracleAndPretrainRepeat) {
  RunConfig c = tiny();
  const auto oracle = [&] { return run_sac_oracle(c).curve; };
  const auto a = oracle(), b = oracle();
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].true_return, b[i].true_return);
  const RunRecord p = run_pretrain(c);
  EXPECT_EQ(p.curve.size(), 1u);
  EXPECT_EQ(p.sessions, 0);
}

TEST(Failure, DivergingRunLeavesFailedMarker) {
  const fs::path out = scratch();
  RunConfig c = tiny(out);
  c.sac.critic_lr = 1e300;
  c.sac.actor_lr = 1e300;
  EXPECT_ANY_THROW(run_pebble(c));
  std::vector<fs::path> dirs(fs::directory_iterator(out), fs::directory_iterator{});
  ASSERT_EQ(dirs.size(), 1u);
  ASSERT_TRUE(fs::exists(dirs[0] / "FAILED"));
  EXPECT_FALSE(slurp(dirs[0] / "FAILED").empty());
}

TEST(Config, ValidationNamesTheField) {
  RunConfig c = tiny();
  c.segment_len = 101;
  try {
    validate(c);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("segment_len"), std::string::npos);
  }
  c = tiny();
  c.pretrain_steps = 2000;
  EXPECT_THROW(validate(c), ContractError);
  c = tiny();
  c.env = "cartpole";
  EXPECT_THROW(validate(c), ContractError);
  c = tiny();
  c.teacher = TeacherKind::kHuman;
  EXPECT_THROW(run_pebble(c), ContractError);
  EXPECT_THROW(evaluate(sac::SacAgent{}, env::EnvId::kPendulum, 0, 1), ContractError);
}

TEST(Config, JsonOverridesAndRejectsUnknownKeys) {
  const RunConfig c = config_from_json(
      nlohmann::json::parse(R"({"env": "pendulum", "budget": 7, "sac": {"gamma": 0.9},
                                "reward": {"hidden": [8]}, "scheme": "entropy"})"));
  EXPECT_EQ(c.env, "pendulum");
  EXPECT_EQ(c.budget, 7);
  EXPECT_EQ(c.sac.gamma, 0.9);
  EXPECT_EQ(c.reward.hidden, std::vector<std::size_t>{8});
  EXPECT_EQ(c.scheme, query::Scheme::kEntropy);
  EXPECT_EQ(c.total_steps, RunConfig{}.total_steps);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"budegt": 7})")), ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"sac": {"lr": 1}})")), ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"budget": "many"})")), ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse("[1]")), ContractError);
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(tiny()))), config_to_json(tiny()));
}

// Relabeling on or off changes stored rewards only; the same sessions are asked.
TEST(Ablation, RelabelSwitchKeepsTheSchedule) {
  RunConfig on = tiny();
  RunConfig off = on;
  off.relabel = false;
  const RunRecord a = run_pebble(on), b = run_pebble(off);
  EXPECT_EQ(queries_column(a), queries_column(b));
  EXPECT_EQ(a.sessions, b.sessions);
  // Pre-training rows come before the first session and match.
  EXPECT_EQ(a.curve[0].true_return, b.curve[0].true_return);
  EXPECT_NE(a.curve.back().true_return, b.curve.back().true_return);
}

TEST(Ablation, RandomPretrainingSkipsUpdates) {
  RunConfig c = tiny();
  c.pretrain_mode = PretrainMode::kRandom;
  c.total_steps = 200;
  c.eval_interval = 200;
  // No updates during random pre-training: the policy is still the initial one.
  RunConfig untouched = c;
  untouched.pretrain_steps = 0;
  untouched.learning_starts = 1'000'000;
  const double random_pre = run_pretrain(c).final_return;
  const double no_update = run_sac_oracle(untouched).final_return;
  EXPECT_EQ(random_pre, no_update);
  c.pretrain_mode = PretrainMode::kEntropy;
  EXPECT_NE(run_pretrain(c).final_return, random_pre);
}

// A human-teacher run driven over HTTP by a client that always picks left.
TEST(HumanTeacher, HeadlessClientAnswersEverySession) {
  const fs::path out = scratch();
  RunConfig c = tiny(out);
  c.teacher = TeacherKind::kHuman;
  c.human_timeout_s = 30.0;
  teacher::QueryQueue queue;
  api::StatusBoard board;
  api::ApiServer server(queue, board);
  const int port = server.start("127.0.0.1", 0);
  std::atomic<bool> done{false};
  std::atomic<int> answered{0};
  std::thread client([&] {
    httplib::Client http("127.0.0.1", port);
    while (!done) {
      const auto res = http.Get("/api/queries/next");
      if (res && res->status == 200) {
        const auto id = nlohmann::json::parse(res->body)["query_id"].get<std::uint64_t>();
        const nlohmann::json body{{"query_id", id}, {"choice", "left"}};
        if (http.Post("/api/preferences", body.dump(), "application/json")->status == 200) {
          ++answered;
        }
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    }
  });
  const RunRecord r = run_pebble(c, {&queue, &board, "live"});
  done = true;
  client.join();
  server.stop();
  EXPECT_EQ(answered.load(), 40);
  EXPECT_EQ(r.labeled_queries, 40);
  const auto recs = reward::load_records(r.run_dir / "preferences.jsonl");
  ASSERT_EQ(recs.size(), 40u);
  for (const auto& rec : recs) {
    EXPECT_EQ(rec.source, "human");
    EXPECT_EQ(rec.label, reward::kPreferFirst);
  }
  EXPECT_EQ(board.status().phase, "done");
  EXPECT_EQ(board.status().run_id, "live");
  EXPECT_EQ(board.curve().size(), 5u);
}

TEST(HumanTeacher, SilentTeacherSkipsEverything) {
  RunConfig c = tiny();
  c.teacher = TeacherKind::kHuman;
  c.human_timeout_s = 0.01;
  teacher::QueryQueue queue;
  const RunRecord r = run_pebble(c, {&queue, nullptr, ""});
  EXPECT_EQ(r.queries_used, 40);
  EXPECT_EQ(r.labeled_queries, 0);
  const auto counts = queue.counts();
  EXPECT_EQ(counts.skipped, 40u);
  EXPECT_EQ(counts.enqueued, 40u);
}

TEST(Ensemble, CheckpointRoundTrip) {
  const fs::path out = scratch();
  Rng rng(1);
  reward::RewardModelConfig cfg;
  cfg.hidden = {8, 8};
  reward::RewardEnsemble a(4, 2, cfg, rng), b(4, 2, cfg, rng);
  save_ensemble(a, out / "r.bin");
  load_ensemble(b, out / "r.bin");
  for (std::size_t m = 0; m < 3; ++m) {
    const auto pa = a.member(m).parameters(), pb = b.member(m).parameters();
    EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
  }
  cfg.ensemble_size = 2;
  reward::RewardEnsemble small(4, 2, cfg, rng);
  EXPECT_ANY_THROW(load_ensemble(small, out / "r.bin"));
}

}  // namespace
}  // namespace pebble::run
