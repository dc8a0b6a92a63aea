// SPDX-License-Identifier: Apache-2.0

#include "pebble/sac.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pebble/binio.hpp"
#include "pebble/errors.hpp"

namespace pebble::sac {
namespace {

constexpr std::array<char, 4> kMagic{'P', 'B', 'C', 'K'};
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

nn::Matrix concat_columns(const nn::Matrix& a, const nn::Matrix& b) {
  nn::Matrix out(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    auto dst = out.row(r);
    const auto ra = a.row(r);
    const auto rb = b.row(r);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols));
  }
  return out;
}

nn::Matrix gaussian_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

void check_finite(double v, const char* where) {
  if (!std::isfinite(v)) throw NumericError(where, v);
}

}  // namespace

double SacAgent::alpha() const { return std::exp(log_alpha); }

double squash_log_std(const SacConfig& c, double raw) {
  return c.log_std_min + 0.5 * (c.log_std_max - c.log_std_min) * (std::tanh(raw) + 1.0);
}

double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

namespace {

nn::Mlp critic_net(std::size_t obs_dim, std::size_t action_dim, const SacConfig& config,
                   Rng& rng) {
  std::vector<std::size_t> sizes{obs_dim + action_dim};
  std::vector<nn::Activation> acts;
  for (std::size_t h : config.hidden) {
    sizes.push_back(h);
    acts.push_back(config.hidden_activation);
  }
  sizes.push_back(1);
  acts.push_back(nn::Activation::kIdentity);
  return nn::Mlp(sizes, acts, rng);
}

nn::AdamConfig adam_for(const SacConfig& c, double lr) {
  return nn::AdamConfig{lr, c.beta1, c.beta2, 1e-8};
}

}  // namespace

SacAgent make_agent(std::size_t obs_dim, std::size_t action_dim, const SacConfig& config,
                    Rng& rng) {
  if (obs_dim == 0 || action_dim == 0) throw ContractError("make_agent: zero dimension");
  SacAgent agent;
  agent.config = config;
  agent.obs_dim = obs_dim;
  agent.action_dim = action_dim;

  std::vector<std::size_t> policy_sizes{obs_dim};
  std::vector<nn::Activation> acts;
  for (std::size_t h : config.hidden) {
    policy_sizes.push_back(h);
    acts.push_back(config.hidden_activation);
  }
  policy_sizes.push_back(2 * action_dim);
  acts.push_back(nn::Activation::kIdentity);

  agent.policy = nn::Mlp(policy_sizes, acts, rng);
  agent.log_alpha = std::log(config.init_temperature);
  agent.target_entropy = -static_cast<double>(action_dim);
  agent.policy_opt =
      nn::AdamState(agent.policy.parameter_count(), adam_for(config, config.actor_lr));
  agent.alpha_opt = nn::AdamState(1, adam_for(config, config.alpha_lr));
  reset_critics(agent, rng);
  return agent;
}

void reset_critics(SacAgent& agent, Rng& rng) {
  const SacConfig& c = agent.config;
  agent.q1 = critic_net(agent.obs_dim, agent.action_dim, c, rng);
  agent.q2 = critic_net(agent.obs_dim, agent.action_dim, c, rng);
  agent.q1_target = agent.q1;
  agent.q2_target = agent.q2;
  agent.q1_opt = nn::AdamState(agent.q1.parameter_count(), adam_for(c, c.critic_lr));
  agent.q2_opt = nn::AdamState(agent.q2.parameter_count(), adam_for(c, c.critic_lr));
}

PolicySample sample_policy(const SacAgent& agent, const nn::Matrix& states,
                           const nn::Matrix& noise) {
  const std::size_t d = agent.action_dim;
  if (noise.rows != states.rows || noise.cols != d) {
    throw ContractError("sample_policy: noise shape mismatch");
  }
  PolicySample ps;
  ps.trace = nn::mlp_forward_trace(agent.policy, states);
  ps.pre_tanh = nn::Matrix(states.rows, d);
  ps.actions = nn::Matrix(states.rows, d);
  ps.log_std = nn::Matrix(states.rows, d);
  ps.log_probs.assign(states.rows, 0.0);
  for (std::size_t b = 0; b < states.rows; ++b) {
    const auto out = ps.trace.output.row(b);
    double lp = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double ls = squash_log_std(agent.config, out[d + j]);
      const double xi = noise.at(b, j);
      const double u = out[j] + std::exp(ls) * xi;
      ps.log_std.at(b, j) = ls;
      ps.pre_tanh.at(b, j) = u;
      ps.actions.at(b, j) = std::tanh(u);
      lp += -0.5 * xi * xi - ls - kHalfLog2Pi - log_one_minus_tanh_sq(u);
    }
    ps.log_probs[b] = lp;
  }
  return ps;
}

std::vector<double> select_action(const SacAgent& agent, std::span<const double> state,
                                  bool deterministic, Rng& rng) {
  if (state.size() != agent.obs_dim) throw ContractError("select_action: state dimension");
  const std::vector<double> out = nn::mlp_forward(agent.policy, state);
  const std::size_t d = agent.action_dim;
  std::vector<double> action(d);
  for (std::size_t j = 0; j < d; ++j) {
    double u = out[j];
    if (!deterministic) u += std::exp(squash_log_std(agent.config, out[d + j])) * rng.normal();
    action[j] = std::tanh(u);
  }
  return action;
}

CriticLoss critic_loss(const SacAgent& agent, const replay::Batch& batch,
                       const nn::Matrix& next_noise) {
  const std::size_t n = batch.size();
  if (n == 0) throw ContractError("critic_loss: empty batch");
  const double alpha = agent.alpha();
  const auto& cfg = agent.config;

  const PolicySample next = sample_policy(agent, batch.next_states, next_noise);
  const nn::Matrix next_in = concat_columns(batch.next_states, next.actions);
  const nn::Matrix tq1 = nn::mlp_forward(agent.q1_target, next_in);
  const nn::Matrix tq2 = nn::mlp_forward(agent.q2_target, next_in);

  std::vector<double> target(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double v = std::min(tq1.data[b], tq2.data[b]) - alpha * next.log_probs[b];
    const double mask = cfg.mask_time_limit ? 1.0 - batch.dones[b] : 1.0;
    target[b] = batch.rewards[b] + cfg.gamma * mask * v;
    check_finite(target[b], "critic_loss: target");
  }

  const nn::Matrix in = concat_columns(batch.states, batch.actions);
  const nn::ForwardTrace t1 = nn::mlp_forward_trace(agent.q1, in);
  const nn::ForwardTrace t2 = nn::mlp_forward_trace(agent.q2, in);
  nn::Matrix g1(n, 1), g2(n, 1);
  CriticLoss out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double e1 = t1.output.data[b] - target[b];
    const double e2 = t2.output.data[b] - target[b];
    out.q1_loss += e1 * e1 * inv_n;
    out.q2_loss += e2 * e2 * inv_n;
    g1.data[b] = e1 * inv_n;
    g2.data[b] = e2 * inv_n;
  }
  out.loss = 0.5 * (out.q1_loss + out.q2_loss);
  check_finite(out.loss, "critic_loss");
  out.q1_grads.assign(agent.q1.parameter_count(), 0.0);
  out.q2_grads.assign(agent.q2.parameter_count(), 0.0);
  nn::mlp_backward(agent.q1, t1, g1, out.q1_grads, false);
  nn::mlp_backward(agent.q2, t2, g2, out.q2_grads, false);
  return out;
}

ActorLoss actor_loss(const SacAgent& agent, const replay::Batch& batch,
                     const nn::Matrix& noise) {
  const std::size_t n = batch.size();
  if (n == 0) throw ContractError("actor_loss: empty batch");
  const std::size_t d = agent.action_dim;
  const std::size_t od = agent.obs_dim;
  const double alpha = agent.alpha();
  const double inv_n = 1.0 / static_cast<double>(n);

  const PolicySample ps = sample_policy(agent, batch.states, noise);
  const nn::Matrix in = concat_columns(batch.states, ps.actions);
  const nn::ForwardTrace t1 = nn::mlp_forward_trace(agent.q1, in);
  const nn::ForwardTrace t2 = nn::mlp_forward_trace(agent.q2, in);

  ActorLoss out;
  nn::Matrix dq1(n, 1), dq2(n, 1);
  for (std::size_t b = 0; b < n; ++b) {
    check_finite(ps.log_probs[b], "actor_loss: log_prob");
    const double q1 = t1.output.data[b];
    const double q2 = t2.output.data[b];
    const bool first = q1 <= q2;
    out.loss += (alpha * ps.log_probs[b] - (first ? q1 : q2)) * inv_n;
    out.mean_log_prob += ps.log_probs[b] * inv_n;
    (first ? dq1 : dq2).data[b] = -inv_n;
  }
  check_finite(out.loss, "actor_loss");

  const nn::Matrix dx1 = nn::mlp_backward(agent.q1, t1, dq1, {}, true);
  const nn::Matrix dx2 = nn::mlp_backward(agent.q2, t2, dq2, {}, true);

  const auto& cfg = agent.config;
  const double half_range = 0.5 * (cfg.log_std_max - cfg.log_std_min);
  nn::Matrix dout(n, 2 * d);
  for (std::size_t b = 0; b < n; ++b) {
    const auto raw = ps.trace.output.row(b);
    for (std::size_t j = 0; j < d; ++j) {
      const double a = ps.actions.at(b, j);
      const double dl_da = dx1.at(b, od + j) + dx2.at(b, od + j);
      // d log pi / du = 2 tanh(u) from the squashing correction.
      const double dl_du = alpha * 2.0 * a * inv_n + dl_da * (1.0 - a * a);
      const double sigma_xi = std::exp(ps.log_std.at(b, j)) * noise.at(b, j);
      const double dl_dls = -alpha * inv_n + dl_du * sigma_xi;
      const double th = std::tanh(raw[d + j]);
      dout.at(b, j) = dl_du;
      dout.at(b, d + j) = dl_dls * half_range * (1.0 - th * th);
    }
  }
  out.policy_grads.assign(agent.policy.parameter_count(), 0.0);
  nn::mlp_backward(agent.policy, ps.trace, dout, out.policy_grads, false);
  return out;
}

double temperature_gradient(const SacAgent& agent, double mean_log_prob) {
  return agent.alpha() * (-mean_log_prob - agent.target_entropy);
}

void temperature_update(SacAgent& agent, double mean_log_prob) {
  const double g = temperature_gradient(agent, mean_log_prob);
  nn::adam_step(std::span<double>(&agent.log_alpha, 1), std::span<const double>(&g, 1),
                agent.alpha_opt);
}

void update_targets(SacAgent& agent) {
  const double tau = agent.config.tau;
  const auto blend = [tau](std::span<double> target, std::span<const double> online) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      target[i] = (1.0 - tau) * target[i] + tau * online[i];
    }
  };
  blend(agent.q1_target.parameters(), agent.q1.parameters());
  blend(agent.q2_target.parameters(), agent.q2.parameters());
}

UpdateMetrics sac_update(SacAgent& agent, const replay::Batch& batch, Rng& rng) {
  UpdateMetrics m;
  const nn::Matrix next_noise = gaussian_noise(batch.size(), agent.action_dim, rng);
  const CriticLoss cl = critic_loss(agent, batch, next_noise);
  nn::adam_step(agent.q1.parameters(), cl.q1_grads, agent.q1_opt);
  nn::adam_step(agent.q2.parameters(), cl.q2_grads, agent.q2_opt);
  ++agent.critic_updates;
  m.critic_loss = cl.loss;

  if (agent.critic_updates % agent.config.actor_update_every == 0) {
    const nn::Matrix noise = gaussian_noise(batch.size(), agent.action_dim, rng);
    const ActorLoss al = actor_loss(agent, batch, noise);
    nn::adam_step(agent.policy.parameters(), al.policy_grads, agent.policy_opt);
    temperature_update(agent, al.mean_log_prob);
    ++agent.actor_updates;
    m.actor_loss = al.loss;
    m.actor_updated = true;
  }
  if (agent.critic_updates % agent.config.target_update_every == 0) update_targets(agent);
  m.alpha = agent.alpha();
  return m;
}

void save_checkpoint(const SacAgent& agent, const std::filesystem::path& path) {
  binio::Container c;
  c.magic = kMagic;
  const auto section = [&](std::span<const double> values) {
    c.dims.push_back(values.size());
    c.body.insert(c.body.end(), values.begin(), values.end());
  };
  section(agent.policy.parameters());
  section(agent.q1.parameters());
  section(agent.q2.parameters());
  section(agent.q1_target.parameters());
  section(agent.q2_target.parameters());
  for (const nn::AdamState* s : {&agent.policy_opt, &agent.q1_opt, &agent.q2_opt, &agent.alpha_opt}) {
    section(s->m);
    section(s->v);
  }
  const std::vector<double> scalars{agent.log_alpha,
                                    static_cast<double>(agent.critic_updates),
                                    static_cast<double>(agent.actor_updates),
                                    static_cast<double>(agent.policy_opt.t),
                                    static_cast<double>(agent.q1_opt.t),
                                    static_cast<double>(agent.q2_opt.t),
                                    static_cast<double>(agent.alpha_opt.t)};
  section(scalars);
  c.count = c.dims.size();
  binio::write_container(path, c);
}

void load_checkpoint(SacAgent& agent, const std::filesystem::path& path) {
  const binio::Container c = binio::read_container(path, kMagic);
  std::size_t offset = 0;
  std::size_t index = 0;
  const auto section = [&](std::span<double> dst) {
    if (index >= c.dims.size() || c.dims[index] != dst.size()) {
      throw std::runtime_error("checkpoint: architecture mismatch at section " +
                               std::to_string(index));
    }
    std::copy_n(c.body.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
    offset += dst.size();
    ++index;
  };
  section(agent.policy.parameters());
  section(agent.q1.parameters());
  section(agent.q2.parameters());
  section(agent.q1_target.parameters());
  section(agent.q2_target.parameters());
  for (nn::AdamState* s : {&agent.policy_opt, &agent.q1_opt, &agent.q2_opt, &agent.alpha_opt}) {
    section(s->m);
    section(s->v);
  }
  std::vector<double> scalars(7);
  section(scalars);
  agent.log_alpha = scalars[0];
  agent.critic_updates = static_cast<std::int64_t>(scalars[1]);
  agent.actor_updates = static_cast<std::int64_t>(scalars[2]);
  agent.policy_opt.t = static_cast<std::int64_t>(scalars[3]);
  agent.q1_opt.t = static_cast<std::int64_t>(scalars[4]);
  agent.q2_opt.t = static_cast<std::int64_t>(scalars[5]);
  agent.alpha_opt.t = static_cast<std::int64_t>(scalars[6]);
}

}  // namespace pebble::sac
