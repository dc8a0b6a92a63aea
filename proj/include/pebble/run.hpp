// SPDX-License-Identifier: Apache-2.0
/**
 * @file   run.hpp
 * @brief  End-to-end training runs: unsupervised pre-training, feedback
 *         sessions interleaved with SAC on the learned reward, periodic
 *         evaluation and run-directory persistence.
 *
 * A run directory holds config.json, curve.csv, preferences.jsonl and
 * checkpoints/. A run that throws leaves a FAILED file with the message.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pebble/env.hpp"
#include "pebble/http_api.hpp"
#include "pebble/query.hpp"
#include "pebble/reward_model.hpp"
#include "pebble/sac.hpp"
#include "pebble/teacher.hpp"

namespace pebble::run {

enum class PretrainMode { kEntropy, kRandom };
enum class TeacherKind { kScripted, kHuman };

struct RunConfig {
  std::string env = "pointmass2d";
  std::uint64_t seed = 0;

  // Step counts are environment steps. total_steps includes pre-training.
  std::int64_t pretrain_steps = 10'000;
  PretrainMode pretrain_mode = PretrainMode::kEntropy;
  std::int64_t total_steps = 60'000;
  std::int64_t learning_starts = 1'000;

  std::int64_t feedback_interval = 2'000;  // K
  std::int64_t queries_per_session = 20;   // M
  std::int64_t budget = 400;
  std::int64_t segment_len = 10;  // H
  query::Scheme scheme = query::Scheme::kDisagreement;
  std::int64_t pool_multiplier = 10;
  bool relabel = true;
  std::size_t knn_k = 5;

  TeacherKind teacher = TeacherKind::kScripted;
  double teacher_eps = 0.0;
  double human_timeout_s = 600.0;

  std::int64_t eval_interval = 1'000;
  std::int64_t eval_episodes = 10;
  std::uint64_t eval_seed = 777;

  sac::SacConfig sac;
  reward::RewardModelConfig reward{3, {64, 64}, 3e-4, 200, 64, 0.97};

  // Checks every buffer reward against the model right after each relabel.
  bool verify_relabel = false;
  // Parent of the timestamped run directory; empty keeps the run in memory.
  std::string output_dir = "runs";
  bool save_checkpoints = true;
};

/// Throws ContractError naming the first invalid field.
void validate(const RunConfig& cfg);

nlohmann::json config_to_json(const RunConfig& cfg);
/// Starts from `base` and overrides the keys present. Unknown keys and
/// ill-typed values throw ContractError.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});

struct RunRecord {
  std::filesystem::path run_dir;  // empty when not persisted
  std::vector<api::CurveRow> curve;
  std::int64_t queries_used = 0;     // asked, including skipped
  std::int64_t labeled_queries = 0;  // answered
  std::int64_t sessions = 0;
  std::int64_t relabel_failures = 0;
  double final_return = 0.0;
  double seconds = 0.0;
};

/// Optional collaborators for live runs. A human-teacher run needs `queue`.
struct RunContext {
  teacher::QueryQueue* queue = nullptr;
  api::StatusBoard* board = nullptr;
  std::string run_id;
};

RunRecord run_pebble(const RunConfig& cfg, const RunContext& ctx = {});

/// Same schedule with the ground-truth reward and no teacher, relabeling or
/// pre-training: plain SAC for total_steps.
RunRecord run_sac_oracle(const RunConfig& cfg, const RunContext& ctx = {});

/// Entropy pre-training only (pretrain_steps), with evaluation rows.
RunRecord run_pretrain(const RunConfig& cfg, const RunContext& ctx = {});

/// Mean ground-truth return of deterministic rollouts. Throws ContractError
/// when episodes < 1.
double evaluate(const sac::SacAgent& agent, env::EnvId id, std::int64_t episodes,
                std::uint64_t seed);

void save_ensemble(const reward::RewardEnsemble& ens, const std::filesystem::path& path);
void load_ensemble(reward::RewardEnsemble& ens, const std::filesystem::path& path);

}  // namespace pebble::run
