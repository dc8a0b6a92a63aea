// SPDX-License-Identifier: Apache-2.0

#include "pebble/run.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "pebble/binio.hpp"
#include "pebble/entropy.hpp"
#include "pebble/errors.hpp"
#include "pebble/replay.hpp"

namespace pebble::run {

using nlohmann::json;

namespace {

constexpr std::array<char, 4> kEnsembleMagic{'P', 'B', 'R', 'M'};

std::string pretrain_name(PretrainMode m) {
  return m == PretrainMode::kEntropy ? "entropy" : "random";
}

PretrainMode pretrain_from_name(const std::string& s) {
  if (s == "entropy") return PretrainMode::kEntropy;
  if (s == "random") return PretrainMode::kRandom;
  throw ContractError("pretrain_mode must be entropy or random, got " + s);
}

std::string teacher_name(TeacherKind t) {
  return t == TeacherKind::kScripted ? "scripted" : "human";
}

TeacherKind teacher_from_name(const std::string& s) {
  if (s == "scripted") return TeacherKind::kScripted;
  if (s == "human") return TeacherKind::kHuman;
  throw ContractError("teacher must be scripted or human, got " + s);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError("invalid config: " + what);
}

}  // namespace

void validate(const RunConfig& c) {
  const env::EnvSpec& spec = env::env_spec(env::env_from_name(c.env));
  require(c.pretrain_steps >= 0, "pretrain_steps must be >= 0");
  require(c.total_steps > 0, "total_steps must be positive");
  require(c.pretrain_steps <= c.total_steps, "pretrain_steps exceeds total_steps");
  require(c.learning_starts >= 0, "learning_starts must be >= 0");
  require(c.feedback_interval > 0, "feedback_interval must be positive");
  require(c.queries_per_session > 0, "queries_per_session must be positive");
  require(c.budget >= 0, "budget must be >= 0");
  require(c.segment_len > 0, "segment_len must be positive");
  require(c.segment_len <= spec.episode_length, "segment_len exceeds the episode length");
  require(c.pool_multiplier >= 1, "pool_multiplier must be >= 1");
  require(c.knn_k >= 1, "knn_k must be >= 1");
  require(c.teacher_eps >= 0.0, "teacher_eps must be >= 0");
  require(c.human_timeout_s > 0.0, "human_timeout_s must be positive");
  require(c.eval_interval > 0, "eval_interval must be positive");
  require(c.eval_episodes >= 1, "eval_episodes must be >= 1");
  require(c.reward.ensemble_size >= 1, "ensemble_size must be >= 1");
  require(c.scheme != query::Scheme::kDisagreement || c.reward.ensemble_size >= 2,
          "disagreement sampling needs ensemble_size >= 2");
  require(c.reward.max_epochs >= 1, "reward max_epochs must be >= 1");
  require(c.reward.batch_size >= 1, "reward batch_size must be >= 1");
  require(c.sac.batch_size >= 1, "sac batch_size must be >= 1");
  require(!c.sac.hidden.empty() && !c.reward.hidden.empty(), "hidden layers must be non-empty");
}

json config_to_json(const RunConfig& c) {
  return {
      {"env", c.env},
      {"seed", c.seed},
      {"pretrain_steps", c.pretrain_steps},
      {"pretrain_mode", pretrain_name(c.pretrain_mode)},
      {"total_steps", c.total_steps},
      {"learning_starts", c.learning_starts},
      {"feedback_interval", c.feedback_interval},
      {"queries_per_session", c.queries_per_session},
      {"budget", c.budget},
      {"segment_len", c.segment_len},
      {"scheme", query::scheme_name(c.scheme)},
      {"pool_multiplier", c.pool_multiplier},
      {"relabel", c.relabel},
      {"knn_k", c.knn_k},
      {"teacher", teacher_name(c.teacher)},
      {"teacher_eps", c.teacher_eps},
      {"human_timeout_s", c.human_timeout_s},
      {"eval_interval", c.eval_interval},
      {"eval_episodes", c.eval_episodes},
      {"eval_seed", c.eval_seed},
      {"verify_relabel", c.verify_relabel},
      {"output_dir", c.output_dir},
      {"save_checkpoints", c.save_checkpoints},
      {"sac",
       {{"hidden", c.sac.hidden},
        {"activation", nn::activation_name(c.sac.hidden_activation)},
        {"gamma", c.sac.gamma},
        {"tau", c.sac.tau},
        {"target_update_every", c.sac.target_update_every},
        {"actor_update_every", c.sac.actor_update_every},
        {"init_temperature", c.sac.init_temperature},
        {"actor_lr", c.sac.actor_lr},
        {"critic_lr", c.sac.critic_lr},
        {"alpha_lr", c.sac.alpha_lr},
        {"beta1", c.sac.beta1},
        {"beta2", c.sac.beta2},
        {"batch_size", c.sac.batch_size},
        {"log_std_min", c.sac.log_std_min},
        {"log_std_max", c.sac.log_std_max},
        {"mask_time_limit", c.sac.mask_time_limit}}},
      {"reward",
       {{"ensemble_size", c.reward.ensemble_size},
        {"hidden", c.reward.hidden},
        {"lr", c.reward.lr},
        {"max_epochs", c.reward.max_epochs},
        {"batch_size", c.reward.batch_size},
        {"target_accuracy", c.reward.target_accuracy}}},
  };
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) ==
        known.end()) {
      throw ContractError("unknown config key '" + where + key + "'");
    }
  }
}

}  // namespace

RunConfig config_from_json(const json& j, const RunConfig& base) {
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  reject_unknown(j,
                 {"env", "seed", "pretrain_steps", "pretrain_mode", "total_steps",
                  "learning_starts", "feedback_interval", "queries_per_session", "budget",
                  "segment_len", "scheme", "pool_multiplier", "relabel", "knn_k", "teacher",
                  "teacher_eps", "human_timeout_s", "eval_interval", "eval_episodes",
                  "eval_seed", "verify_relabel", "output_dir", "save_checkpoints", "sac",
                  "reward"},
                 "");
  RunConfig c = base;
  take(j, "env", c.env);
  take(j, "seed", c.seed);
  take(j, "pretrain_steps", c.pretrain_steps);
  if (j.contains("pretrain_mode")) {
    std::string s;
    take(j, "pretrain_mode", s);
    c.pretrain_mode = pretrain_from_name(s);
  }
  take(j, "total_steps", c.total_steps);
  take(j, "learning_starts", c.learning_starts);
  take(j, "feedback_interval", c.feedback_interval);
  take(j, "queries_per_session", c.queries_per_session);
  take(j, "budget", c.budget);
  take(j, "segment_len", c.segment_len);
  if (j.contains("scheme")) {
    std::string s;
    take(j, "scheme", s);
    c.scheme = query::scheme_from_name(s);
  }
  take(j, "pool_multiplier", c.pool_multiplier);
  take(j, "relabel", c.relabel);
  take(j, "knn_k", c.knn_k);
  if (j.contains("teacher")) {
    std::string s;
    take(j, "teacher", s);
    c.teacher = teacher_from_name(s);
  }
  take(j, "teacher_eps", c.teacher_eps);
  take(j, "human_timeout_s", c.human_timeout_s);
  take(j, "eval_interval", c.eval_interval);
  take(j, "eval_episodes", c.eval_episodes);
  take(j, "eval_seed", c.eval_seed);
  take(j, "verify_relabel", c.verify_relabel);
  take(j, "output_dir", c.output_dir);
  take(j, "save_checkpoints", c.save_checkpoints);

  if (const auto it = j.find("sac"); it != j.end()) {
    const json& s = *it;
    if (!s.is_object()) throw ContractError("config field 'sac' must be an object");
    reject_unknown(s,
                   {"hidden", "activation", "gamma", "tau", "target_update_every",
                    "actor_update_every", "init_temperature", "actor_lr", "critic_lr",
                    "alpha_lr", "beta1", "beta2", "batch_size", "log_std_min", "log_std_max",
                    "mask_time_limit"},
                   "sac.");
    take(s, "hidden", c.sac.hidden);
    if (s.contains("activation")) {
      std::string a;
      take(s, "activation", a);
      c.sac.hidden_activation = nn::activation_from_name(a);
    }
    take(s, "gamma", c.sac.gamma);
    take(s, "tau", c.sac.tau);
    take(s, "target_update_every", c.sac.target_update_every);
    take(s, "actor_update_every", c.sac.actor_update_every);
    take(s, "init_temperature", c.sac.init_temperature);
    take(s, "actor_lr", c.sac.actor_lr);
    take(s, "critic_lr", c.sac.critic_lr);
    take(s, "alpha_lr", c.sac.alpha_lr);
    take(s, "beta1", c.sac.beta1);
    take(s, "beta2", c.sac.beta2);
    take(s, "batch_size", c.sac.batch_size);
    take(s, "log_std_min", c.sac.log_std_min);
    take(s, "log_std_max", c.sac.log_std_max);
    take(s, "mask_time_limit", c.sac.mask_time_limit);
  }
  if (const auto it = j.find("reward"); it != j.end()) {
    const json& r = *it;
    if (!r.is_object()) throw ContractError("config field 'reward' must be an object");
    reject_unknown(r, {"ensemble_size", "hidden", "lr", "max_epochs", "batch_size",
                       "target_accuracy"},
                   "reward.");
    take(r, "ensemble_size", c.reward.ensemble_size);
    take(r, "hidden", c.reward.hidden);
    take(r, "lr", c.reward.lr);
    take(r, "max_epochs", c.reward.max_epochs);
    take(r, "batch_size", c.reward.batch_size);
    take(r, "target_accuracy", c.reward.target_accuracy);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ContractError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, base);
}

double evaluate(const sac::SacAgent& agent, env::EnvId id, std::int64_t episodes,
                std::uint64_t seed) {
  if (episodes < 1) throw ContractError("evaluate: episodes must be >= 1");
  env::EpisodeCursor cursor{id, seed, -1, {}};
  Rng unused(0);
  double total = 0.0;
  for (std::int64_t e = 0; e < episodes; ++e) {
    cursor.start_next();
    for (;;) {
      const auto action = sac::select_action(agent, cursor.state.observation, true, unused);
      const env::StepResult sr = env::step(id, cursor.state, action);
      total += sr.true_reward;
      if (sr.done) break;
      cursor.state = sr.next_state;
    }
  }
  return total / static_cast<double>(episodes);
}

void save_ensemble(const reward::RewardEnsemble& ens, const std::filesystem::path& path) {
  binio::Container c;
  c.magic = kEnsembleMagic;
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const auto p = ens.member(m).parameters();
    c.dims.push_back(p.size());
    c.body.insert(c.body.end(), p.begin(), p.end());
  }
  c.count = ens.size();
  binio::write_container(path, c);
}

void load_ensemble(reward::RewardEnsemble& ens, const std::filesystem::path& path) {
  const binio::Container c = binio::read_container(path, kEnsembleMagic);
  if (c.count != ens.size() || c.dims.size() != ens.size()) {
    throw std::runtime_error("ensemble checkpoint has a different member count");
  }
  std::size_t offset = 0;
  for (std::size_t m = 0; m < ens.size(); ++m) {
    auto p = ens.member(m).parameters();
    if (c.dims[m] != p.size()) throw std::runtime_error("ensemble checkpoint shape mismatch");
    std::copy_n(c.body.begin() + static_cast<std::ptrdiff_t>(offset), p.size(), p.begin());
    offset += p.size();
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string timestamp_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

std::filesystem::path make_run_dir(const RunConfig& cfg, const std::string& kind) {
  namespace fs = std::filesystem;
  const std::string stem =
      timestamp_now() + "_" + kind + "_" + cfg.env + "_s" + std::to_string(cfg.seed);
  fs::create_directories(cfg.output_dir);
  fs::path dir = fs::path(cfg.output_dir) / stem;
  for (int n = 1; fs::exists(dir); ++n) {
    dir = fs::path(cfg.output_dir) / (stem + "_" + std::to_string(n));
  }
  fs::create_directories(dir / "checkpoints");
  return dir;
}

/// Everything one run owns. Streams are forked in a fixed order so a config
/// and seed pin down the whole trajectory.
class Runner {
 public:
  Runner(const RunConfig& cfg, const RunContext& ctx, const std::string& kind)
      : cfg_(cfg),
        ctx_(ctx),
        kind_(kind),
        env_id_(env::env_from_name(cfg.env)),
        spec_(env::env_spec(env_id_)),
        master_(cfg.seed),
        init_rng_(master_.fork()),
        act_rng_(master_.fork()),
        update_rng_(master_.fork()),
        query_rng_(master_.fork()),
        train_rng_(master_.fork()),
        agent_(sac::make_agent(spec_.obs_dim, spec_.action_dim, cfg.sac, init_rng_)),
        ensemble_(spec_.obs_dim, spec_.action_dim, cfg.reward, init_rng_),
        buffer_(spec_.obs_dim, spec_.action_dim,
                static_cast<std::size_t>(std::max<std::int64_t>(cfg.total_steps, 1))),
        cursor_{env_id_, master_.next_u64(), -1, {}} {
    validate(cfg);
    if (cfg.teacher == TeacherKind::kHuman && ctx.queue == nullptr && kind == "pebble") {
      throw ContractError("a human-teacher run needs a query queue");
    }
    est_.k = cfg.knn_k;
    cursor_.start_next();
  }

  RunRecord execute(const std::function<void(Runner&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!cfg_.output_dir.empty()) {
      record_.run_dir = make_run_dir(cfg_, kind_);
      std::ofstream(record_.run_dir / "config.json") << config_to_json(cfg_).dump(2) << '\n';
      std::ofstream(record_.run_dir / "curve.csv") << api::kCurveHeader << '\n';
      std::ofstream(record_.run_dir / "preferences.jsonl");
    }
    try {
      publish("running");
      body(*this);
      if (!record_.run_dir.empty() && cfg_.save_checkpoints) {
        sac::save_checkpoint(agent_, record_.run_dir / "checkpoints" / "agent.bin");
        save_ensemble(ensemble_, record_.run_dir / "checkpoints" / "reward.bin");
      }
      publish("done");
    } catch (const std::exception& e) {
      publish("failed");
      if (!record_.run_dir.empty()) {
        std::ofstream(record_.run_dir / "FAILED") << e.what() << '\n';
      }
      throw;
    }
    record_.final_return = record_.curve.empty() ? 0.0 : record_.curve.back().true_return;
    record_.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return record_;
  }

  // ---- phases --------------------------------------------------------------

  void entropy_pretrain() {
    entropy::ExploreOptions opts;
    opts.steps = cfg_.pretrain_steps;
    opts.learning_starts = static_cast<std::size_t>(cfg_.learning_starts);
    entropy::explore_phase(cursor_, agent_, buffer_, est_, opts, act_rng_,
                           [this](std::int64_t) { after_env_step(); });
  }

  // Uniform random actions, stored with the current model's reward, no updates.
  void random_pretrain() {
    for (std::int64_t t = 0; t < cfg_.pretrain_steps; ++t) {
      std::vector<double> action(spec_.action_dim);
      for (double& a : action) a = act_rng_.uniform(-1.0, 1.0);
      collect(action, predict(cursor_.state.observation, action));
      after_env_step();
    }
  }

  void pretrain() {
    phase_ = "pretrain";
    if (cfg_.pretrain_mode == PretrainMode::kEntropy) {
      entropy_pretrain();
    } else {
      random_pretrain();
    }
  }

  // Q-values fitted to the intrinsic reward say nothing about the learned one.
  void reset_critics_after_pretrain() {
    if (cfg_.pretrain_mode == PretrainMode::kEntropy && cfg_.pretrain_steps > 0) {
      sac::reset_critics(agent_, init_rng_);
    }
  }

  void pebble_loop() {
    phase_ = "train";
    bool session_due = false;
    while (env_steps_ < cfg_.total_steps) {
      const std::int64_t policy_step = env_steps_ - cfg_.pretrain_steps;
      if (policy_step % cfg_.feedback_interval == 0 && record_.queries_used < cfg_.budget) {
        session_due = true;
      }
      // A scheduled session waits until the buffer holds a full segment.
      if (session_due &&
          buffer_.count_segment_windows(static_cast<std::size_t>(cfg_.segment_len)) > 0) {
        feedback_session();
        session_due = false;
      }
      const auto action = sac::select_action(agent_, cursor_.state.observation, false, act_rng_);
      collect(action, predict(cursor_.state.observation, action));
      maybe_update();
      after_env_step();
    }
  }

  void oracle_loop() {
    phase_ = "train";
    while (env_steps_ < cfg_.total_steps) {
      const auto action = sac::select_action(agent_, cursor_.state.observation, false, act_rng_);
      collect(action, env::true_reward(env_id_, cursor_.state.observation, action));
      maybe_update();
      after_env_step();
    }
  }

 private:
  double predict(std::span<const double> s, std::span<const double> a) const {
    return reward::predict_reward(ensemble_, s, a);
  }

  replay::RewardFn reward_fn() const {
    return [this](const nn::Matrix& s, const nn::Matrix& a) {
      return reward::predict_rewards(ensemble_, s, a);
    };
  }

  void collect(const std::vector<double>& action, double stored_reward) {
    const env::StepResult sr = env::step(env_id_, cursor_.state, action);
    replay::Transition tr;
    tr.state = cursor_.state.observation;
    tr.action = action;
    tr.next_state = sr.next_state.observation;
    tr.stored_reward = stored_reward;
    tr.done = sr.done;
    tr.episode_id = cursor_.episode;
    buffer_.push(tr);
    if (sr.done) {
      cursor_.start_next();
    } else {
      cursor_.state = sr.next_state;
    }
  }

  void maybe_update() {
    const auto warm = std::max<std::size_t>(static_cast<std::size_t>(cfg_.learning_starts),
                                            cfg_.sac.batch_size);
    if (buffer_.size() >= warm) {
      sac::sac_update(agent_, buffer_.sample_batch(cfg_.sac.batch_size, update_rng_),
                      update_rng_);
    }
  }

  void after_env_step() {
    ++env_steps_;
    if (env_steps_ % cfg_.eval_interval == 0) {
      const double ret = evaluate(agent_, env_id_, cfg_.eval_episodes, cfg_.eval_seed);
      const api::CurveRow row{env_steps_, ret, record_.queries_used};
      record_.curve.push_back(row);
      if (!record_.run_dir.empty()) {
        std::ofstream(record_.run_dir / "curve.csv", std::ios::app)
            << api::curve_csv({row}).substr(std::char_traits<char>::length(api::kCurveHeader) +
                                            1);
      }
      if (ctx_.board) ctx_.board->append_curve(row);
      latest_return_ = ret;
    }
    if (ctx_.board && (env_steps_ % 100 == 0 || env_steps_ == cfg_.total_steps)) {
      publish(phase_);
    }
  }

  void publish(const std::string& phase) {
    if (!ctx_.board) return;
    api::RunStatus s;
    s.run_id = ctx_.run_id.empty() ? record_.run_dir.filename().string() : ctx_.run_id;
    s.env = cfg_.env;
    s.phase = phase;
    s.env_steps = env_steps_;
    s.queries_used = record_.queries_used;
    s.budget = cfg_.budget;
    s.latest_eval_return = latest_return_;
    ctx_.board->publish(s);
  }

  std::vector<std::optional<reward::Label>> label(
      const std::vector<query::QueryCandidate>& selected) {
    std::vector<std::optional<reward::Label>> labels;
    if (cfg_.teacher == TeacherKind::kScripted) {
      for (const auto& c : selected) {
        labels.push_back(teacher::scripted_label(env_id_, c.seg0, c.seg1, cfg_.teacher_eps));
      }
      return labels;
    }
    publish("awaiting_feedback");
    const auto ids = teacher::enqueue_queries(*ctx_.queue, selected, env_id_);
    query_ids_ = ids;
    const auto timeout = std::chrono::milliseconds(
        static_cast<std::int64_t>(cfg_.human_timeout_s * 1000.0));
    for (const auto& o : ctx_.queue->await_session_labels(ids, timeout)) {
      labels.push_back(o.label);
    }
    return labels;
  }

  void feedback_session() {
    const std::int64_t n = std::min(cfg_.queries_per_session, cfg_.budget - record_.queries_used);
    const auto h = static_cast<std::size_t>(cfg_.segment_len);
    auto pool = query::generate_candidates(
        buffer_, ensemble_, static_cast<std::size_t>(n * cfg_.pool_multiplier), h, query_rng_);
    auto selected =
        query::select_queries(std::move(pool), static_cast<std::size_t>(n), cfg_.scheme,
                              query_rng_);
    query_ids_.clear();
    const auto labels = label(selected);
    record_.queries_used += n;
    ++record_.sessions;

    std::vector<reward::PreferenceRecord> fresh;
    for (std::size_t i = 0; i < selected.size(); ++i) {
      if (!labels[i]) continue;
      reward::PreferenceRecord rec;
      rec.seg0 = std::move(selected[i].seg0);
      rec.seg1 = std::move(selected[i].seg1);
      rec.label = *labels[i];
      rec.query_id = query_ids_.empty() ? next_scripted_id_++ : query_ids_[i];
      rec.source = teacher_name(cfg_.teacher);
      rec.timestamp = teacher::unix_now();
      fresh.push_back(std::move(rec));
    }
    record_.labeled_queries += static_cast<std::int64_t>(fresh.size());
    if (!record_.run_dir.empty()) {
      reward::append_records(record_.run_dir / "preferences.jsonl", fresh);
    }
    for (auto& r : fresh) dataset_.push_back(std::move(r));
    if (dataset_.empty()) return;

    phase_ = "reward_training";
    reward::train_session(ensemble_, dataset_, cfg_.reward.max_epochs, cfg_.reward.batch_size,
                          train_rng_);
    if (cfg_.relabel) {
      buffer_.relabel_all(reward_fn());
      if (cfg_.verify_relabel && buffer_.first_label_mismatch(reward_fn())) {
        ++record_.relabel_failures;
      }
    }
    phase_ = "train";
  }

  const RunConfig& cfg_;
  const RunContext& ctx_;
  std::string kind_;
  env::EnvId env_id_;
  const env::EnvSpec& spec_;
  Rng master_;
  Rng init_rng_, act_rng_, update_rng_, query_rng_, train_rng_;
  sac::SacAgent agent_;
  reward::RewardEnsemble ensemble_;
  replay::ReplayBuffer buffer_;
  env::EpisodeCursor cursor_;
  entropy::EntropyEstimatorState est_;
  std::vector<reward::PreferenceRecord> dataset_;
  std::vector<std::uint64_t> query_ids_;
  std::uint64_t next_scripted_id_ = 1;
  std::int64_t env_steps_ = 0;
  double latest_return_ = 0.0;
  std::string phase_ = "idle";
  RunRecord record_;
};

}  // namespace

RunRecord run_pebble(const RunConfig& cfg, const RunContext& ctx) {
  validate(cfg);
  Runner r(cfg, ctx, "pebble");
  return r.execute([](Runner& run) {
    run.pretrain();
    run.reset_critics_after_pretrain();
    run.pebble_loop();
  });
}

RunRecord run_sac_oracle(const RunConfig& cfg, const RunContext& ctx) {
  RunConfig c = cfg;
  c.pretrain_steps = 0;
  validate(c);
  Runner r(c, ctx, "oracle");
  return r.execute([](Runner& run) { run.oracle_loop(); });
}

RunRecord run_pretrain(const RunConfig& cfg, const RunContext& ctx) {
  RunConfig c = cfg;
  c.total_steps = cfg.pretrain_steps;
  validate(c);
  Runner r(c, ctx, "pretrain");
  return r.execute([](Runner& run) { run.pretrain(); });
}

}  // namespace pebble::run
