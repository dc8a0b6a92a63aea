// SPDX-License-Identifier: Apache-2.0
/**
 * @file   sac.hpp
 * @brief  Soft actor-critic with twin critics, a tanh-squashed Gaussian
 *         policy, EMA target critics and a learned temperature.
 *
 * Losses take their Gaussian noise as an explicit matrix so that gradients
 * can be checked against finite differences with the noise held fixed.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pebble/nn.hpp"
#include "pebble/replay.hpp"
#include "pebble/rng.hpp"

namespace pebble::sac {

struct SacConfig {
  std::vector<std::size_t> hidden{64, 64};
  nn::Activation hidden_activation = nn::Activation::kRelu;
  double gamma = 0.99;
  double tau = 0.005;
  int target_update_every = 2;
  int actor_update_every = 1;
  double init_temperature = 0.1;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double alpha_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch_size = 128;
  double log_std_min = -10.0;
  double log_std_max = 2.0;
  // When false the episode-end flag never masks the bootstrap, which is the
  // right call for episodes that end only on a time limit.
  bool mask_time_limit = false;
};

struct SacAgent {
  SacConfig config;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  nn::Mlp policy;  // obs -> (mean, raw log-std) per action dim
  nn::Mlp q1, q2;  // (obs, action) -> Q
  nn::Mlp q1_target, q2_target;
  double log_alpha = 0.0;
  double target_entropy = 0.0;
  nn::AdamState policy_opt, q1_opt, q2_opt, alpha_opt;
  std::int64_t critic_updates = 0;
  std::int64_t actor_updates = 0;

  double alpha() const;
};

SacAgent make_agent(std::size_t obs_dim, std::size_t action_dim, const SacConfig& config,
                    Rng& rng);

/// Fresh critics, targets and critic optimizers. Actor and temperature are kept.
void reset_critics(SacAgent& agent, Rng& rng);

/// Squashes a raw head output into [log_std_min, log_std_max].
double squash_log_std(const SacConfig& c, double raw);

/// Batched reparameterized policy sample. `noise` is rows x action_dim.
struct PolicySample {
  nn::ForwardTrace trace;
  nn::Matrix pre_tanh;  // u = mean + std * noise
  nn::Matrix actions;   // tanh(u)
  nn::Matrix log_std;
  std::vector<double> log_probs;
};

PolicySample sample_policy(const SacAgent& agent, const nn::Matrix& states,
                           const nn::Matrix& noise);

/// log(1 - tanh(u)^2) in the overflow-free form 2 (log 2 - u - softplus(-2u)).
double log_one_minus_tanh_sq(double u);

std::vector<double> select_action(const SacAgent& agent, std::span<const double> state,
                                  bool deterministic, Rng& rng);

struct CriticLoss {
  double loss = 0.0;  // mean of the two critics' squared Bellman errors
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  std::vector<double> q1_grads;
  std::vector<double> q2_grads;
};

CriticLoss critic_loss(const SacAgent& agent, const replay::Batch& batch,
                       const nn::Matrix& next_noise);

struct ActorLoss {
  double loss = 0.0;
  double mean_log_prob = 0.0;  // also d(loss)/d(alpha)
  std::vector<double> policy_grads;
};

ActorLoss actor_loss(const SacAgent& agent, const replay::Batch& batch,
                     const nn::Matrix& noise);

/// d/d(log alpha) of alpha * mean(-log pi - target_entropy).
double temperature_gradient(const SacAgent& agent, double mean_log_prob);
void temperature_update(SacAgent& agent, double mean_log_prob);

/// Target <- (1 - tau) target + tau online, for both critics.
void update_targets(SacAgent& agent);

struct UpdateMetrics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  bool actor_updated = false;
};

/// One critic step, an actor + temperature step every actor_update_every
/// critic steps, and target averaging every target_update_every critic steps.
UpdateMetrics sac_update(SacAgent& agent, const replay::Batch& batch, Rng& rng);

void save_checkpoint(const SacAgent& agent, const std::filesystem::path& path);
// The agent must already have the checkpoint's architecture.
void load_checkpoint(SacAgent& agent, const std::filesystem::path& path);

}  // namespace pebble::sac
