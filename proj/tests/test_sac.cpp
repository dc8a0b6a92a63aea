// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "pebble/errors.hpp"
#include "pebble/run.hpp"
#include "pebble/sac.hpp"
#include "support/fd.hpp"
#include "support/oracles.hpp"

namespace pebble::sac {
namespace {

using testing::fd_check;

SacConfig small_config(std::vector<std::size_t> hidden = {8, 8}) {
  SacConfig c;
  c.hidden = std::move(hidden);
  return c;
}

replay::Batch random_batch(Rng& rng, std::size_t n, std::size_t od, std::size_t ad) {
  replay::Batch b;
  b.states = nn::Matrix(n, od);
  b.actions = nn::Matrix(n, ad);
  b.next_states = nn::Matrix(n, od);
  for (double& v : b.states.data) v = rng.uniform(-1, 1);
  for (double& v : b.actions.data) v = rng.uniform(-0.9, 0.9);
  for (double& v : b.next_states.data) v = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    b.rewards.push_back(rng.uniform(-1, 1));
    b.dones.push_back(rng.index(4) == 0 ? 1.0 : 0.0);
  }
  return b;
}

nn::Matrix random_noise(Rng& rng, std::size_t n, std::size_t d) {
  nn::Matrix m(n, d);
  for (double& v : m.data) v = rng.normal();
  return m;
}

// Plain forward through every layer via the triple-loop oracle.
std::vector<double> oracle_forward(const nn::Mlp& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto w = net.weights(l), b = net.bias(l);
    x = testing::dense(x, {w.begin(), w.end()}, {b.begin(), b.end()});
    if (net.layers()[l].activation == nn::Activation::kRelu) {
      for (double& v : x) v = testing::relu(v);
    }
  }
  return x;
}

TEST(SelectAction, ZeroMeanDeterministicIsZero) {
  Rng rng(1);
  SacAgent agent = make_agent(3, 2, small_config(), rng);
  for (double& p : agent.policy.parameters()) p = 0.0;
  const auto a = select_action(agent, std::vector<double>{0.3, 0.1, -0.2}, true, rng);
  EXPECT_EQ(a, (std::vector<double>{0.0, 0.0}));
}

TEST(SelectAction, BoundedAndSeedDeterministic) {
  Rng init(2);
  const SacAgent agent = make_agent(3, 2, small_config(), init);
  Rng r1(10), r2(10), probe(3);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> s{probe.uniform(-5, 5), probe.uniform(-5, 5), probe.uniform(-5, 5)};
    const auto a1 = select_action(agent, s, false, r1);
    const auto a2 = select_action(agent, s, false, r2);
    ASSERT_EQ(a1, a2);
    for (double v : a1) {
      ASSERT_GT(v, -1.0);
      ASSERT_LT(v, 1.0);
    }
  }
  EXPECT_THROW(select_action(agent, std::vector<double>{1.0}, true, r1), ContractError);
}

TEST(LogStd, SquashedIntoRange) {
  const SacConfig c;
  EXPECT_DOUBLE_EQ(squash_log_std(c, -50.0), -10.0);
  EXPECT_DOUBLE_EQ(squash_log_std(c, 50.0), 2.0);
  EXPECT_DOUBLE_EQ(squash_log_std(c, 0.0), -4.0);
}

TEST(LogStd, StableTanhCorrection) {
  for (double u : {-3.0, -0.5, 0.0, 0.2, 1.7, 4.0}) {
    const double t = std::tanh(u);
    EXPECT_NEAR(log_one_minus_tanh_sq(u), std::log(1.0 - t * t), 1e-12);
  }
  EXPECT_TRUE(std::isfinite(log_one_minus_tanh_sq(400.0)));
}

TEST(CriticLoss, ExactFitWithoutDiscountIsZero) {
  Rng rng(3);
  SacConfig cfg = small_config();
  cfg.gamma = 0.0;
  SacAgent agent = make_agent(3, 1, cfg, rng);
  for (nn::Mlp* q : {&agent.q1, &agent.q2}) {
    for (double& p : q->parameters()) p = 0.0;
    q->bias(q->layers().size() - 1)[0] = 0.75;
  }
  replay::Batch b = random_batch(rng, 4, 3, 1);
  for (double& r : b.rewards) r = 0.75;
  EXPECT_EQ(critic_loss(agent, b, random_noise(rng, 4, 1)).loss, 0.0);

  b.rewards = {0.5, 0.5, 0.5, 0.5};
  const CriticLoss cl = critic_loss(agent, b, random_noise(rng, 4, 1));
  EXPECT_NEAR(cl.loss, (0.75 - 0.5) * (0.75 - 0.5), 1e-15);
}

// Bellman residual evaluated by hand for one transition.
TEST(CriticLoss, MatchesHandEvaluation) {
  Rng rng(4);
  SacConfig cfg = small_config({5});
  cfg.mask_time_limit = true;
  SacAgent agent = make_agent(3, 2, cfg, rng);
  // Targets distinct from online nets.
  for (double& p : agent.q1_target.parameters()) p += rng.uniform(-0.2, 0.2);
  for (double& p : agent.q2_target.parameters()) p += rng.uniform(-0.2, 0.2);
  agent.log_alpha = std::log(0.3);
  for (double done : {0.0, 1.0}) {
    replay::Batch b = random_batch(rng, 1, 3, 2);
    b.dones = {done};
    const nn::Matrix xi = random_noise(rng, 1, 2);

    const std::vector<double> s(b.states.data), a(b.actions.data), s2(b.next_states.data);
    const auto out = oracle_forward(agent.policy, s2);
    std::vector<double> a2(2);
    double logp = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double ls = -10.0 + 6.0 * (std::tanh(out[2 + j]) + 1.0);
      const double u = out[j] + std::exp(ls) * xi.data[j];
      a2[j] = std::tanh(u);
      logp += -0.5 * xi.data[j] * xi.data[j] - ls - 0.5 * std::log(2.0 * std::numbers::pi) -
              std::log(1.0 - a2[j] * a2[j]);
    }
    std::vector<double> next_in = s2;
    next_in.insert(next_in.end(), a2.begin(), a2.end());
    const double v = std::min(oracle_forward(agent.q1_target, next_in)[0],
                              oracle_forward(agent.q2_target, next_in)[0]) -
                     0.3 * logp;
    const double y = b.rewards[0] + 0.99 * (1.0 - done) * v;
    std::vector<double> in = s;
    in.insert(in.end(), a.begin(), a.end());
    const double e1 = oracle_forward(agent.q1, in)[0] - y;
    const double e2 = oracle_forward(agent.q2, in)[0] - y;

    const CriticLoss cl = critic_loss(agent, b, xi);
    EXPECT_NEAR(cl.q1_loss, e1 * e1, 1e-9);
    EXPECT_NEAR(cl.q2_loss, e2 * e2, 1e-9);
    EXPECT_NEAR(cl.loss, 0.5 * (e1 * e1 + e2 * e2), 1e-9);
  }
}

TEST(CriticLoss, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    SacConfig cfg = small_config({6, 6});
    cfg.hidden_activation = trial % 2 == 0 ? nn::Activation::kRelu : nn::Activation::kTanh;
    SacAgent agent = make_agent(3, 2, cfg, rng);
    const replay::Batch b = random_batch(rng, 1 + rng.index(5), 3, 2);
    const nn::Matrix xi = random_noise(rng, b.size(), 2);
    const CriticLoss cl = critic_loss(agent, b, xi);
    const auto loss = [&] { return critic_loss(agent, b, xi).loss; };
    for (auto [net, grads] : {std::pair{&agent.q1, &cl.q1_grads}, std::pair{&agent.q2, &cl.q2_grads}}) {
      const auto r = fd_check(net->parameters(), loss, *grads);
      EXPECT_GT(r.checked, 0u);
      worst = std::max(worst, r.max_rel_err);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(ActorLoss, ZeroTemperatureConstantCritics) {
  Rng rng(6);
  SacAgent agent = make_agent(3, 1, small_config(), rng);
  agent.log_alpha = -std::numeric_limits<double>::infinity();
  for (nn::Mlp* q : {&agent.q1, &agent.q2}) {
    for (double& p : q->parameters()) p = 0.0;
    q->bias(q->layers().size() - 1)[0] = 2.5;
  }
  const replay::Batch b = random_batch(rng, 6, 3, 1);
  EXPECT_DOUBLE_EQ(actor_loss(agent, b, random_noise(rng, 6, 1)).loss, -2.5);
}

TEST(ActorLoss, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    SacConfig cfg = small_config({6, 6});
    cfg.hidden_activation = trial % 2 == 0 ? nn::Activation::kRelu : nn::Activation::kLeakyRelu;
    SacAgent agent = make_agent(3, 2, cfg, rng);
    agent.log_alpha = std::log(rng.uniform(0.05, 1.0));
    const replay::Batch b = random_batch(rng, 1 + rng.index(5), 3, 2);
    const nn::Matrix xi = random_noise(rng, b.size(), 2);
    const ActorLoss al = actor_loss(agent, b, xi);
    const auto r = fd_check(agent.policy.parameters(),
                            [&] { return actor_loss(agent, b, xi).loss; }, al.policy_grads);
    EXPECT_GT(r.checked, 0u);
    worst = std::max(worst, r.max_rel_err);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(ActorLoss, TemperatureDerivativeIsMeanLogProb) {
  Rng rng(8);
  SacAgent agent = make_agent(3, 2, small_config(), rng);
  const replay::Batch b = random_batch(rng, 8, 3, 2);
  const nn::Matrix xi = random_noise(rng, 8, 2);
  const ActorLoss base = actor_loss(agent, b, xi);
  // Loss is affine in alpha; any step gives the exact slope.
  const double a0 = agent.alpha();
  agent.log_alpha = std::log(a0 + 0.25);
  const double slope = (actor_loss(agent, b, xi).loss - base.loss) / 0.25;
  EXPECT_NEAR(slope, base.mean_log_prob, 1e-9);
}

TEST(Targets, EmaEndpointsAndScalar) {
  Rng rng(9);
  SacConfig cfg = small_config();
  cfg.tau = 1.0;
  SacAgent agent = make_agent(3, 1, cfg, rng);
  for (double& p : agent.q1.parameters()) p += 1.0;
  update_targets(agent);
  EXPECT_TRUE(std::equal(agent.q1.parameters().begin(), agent.q1.parameters().end(),
                         agent.q1_target.parameters().begin()));

  agent.config.tau = 0.0;
  const std::vector<double> before(agent.q2_target.parameters().begin(),
                                   agent.q2_target.parameters().end());
  for (double& p : agent.q2.parameters()) p += 1.0;
  update_targets(agent);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), agent.q2_target.parameters().begin()));

  agent.config.tau = 0.005;
  agent.q1_target.parameters()[0] = 0.0;
  agent.q1.parameters()[0] = 1.0;
  update_targets(agent);
  EXPECT_DOUBLE_EQ(agent.q1_target.parameters()[0], 0.005);
}

TEST(Targets, DistanceContractsGeometrically) {
  Rng rng(10);
  SacAgent agent = make_agent(3, 1, small_config(), rng);
  for (double& p : agent.q1_target.parameters()) p += rng.uniform(-1, 1);
  const auto dist = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < agent.q1.parameter_count(); ++i) {
      const double d = agent.q1_target.parameters()[i] - agent.q1.parameters()[i];
      s += d * d;
    }
    return std::sqrt(s);
  };
  double prev = dist();
  for (int i = 0; i < 50; ++i) {
    update_targets(agent);
    const double now = dist();
    EXPECT_NEAR(now / prev, 1.0 - agent.config.tau, 1e-9);
    prev = now;
  }
}

TEST(Temperature, SignAndZeroContracts) {
  Rng rng(11);
  SacAgent agent = make_agent(3, 2, small_config(), rng);
  // Entropy -E[log pi] equal to target -2.
  EXPECT_EQ(temperature_gradient(agent, 2.0), 0.0);
  const double before = agent.log_alpha;
  temperature_update(agent, 2.0);
  EXPECT_EQ(agent.log_alpha, before);
  // Entropy -3 is below the target of -2.
  temperature_update(agent, 3.0);
  EXPECT_GT(agent.log_alpha, before);
  const double mid = agent.log_alpha;
  temperature_update(agent, -1.0);  // entropy 1 above target
  EXPECT_LT(agent.log_alpha, mid);
}

// Fixed Gaussian policy: zero weights, mean bias 0, log-std bias raw c, one
// action dim. E[log pi] with known noise is computed in closed form, then one
// Adam step on log alpha is replayed by hand.
TEST(Temperature, OneStepOnFixedGaussian) {
  Rng rng(12);
  SacAgent agent = make_agent(2, 1, small_config({4}), rng);
  for (double& p : agent.policy.parameters()) p = 0.0;
  const double raw = -0.3;
  agent.policy.bias(1)[1] = raw;
  const replay::Batch b = random_batch(rng, 3, 2, 1);
  nn::Matrix xi(3, 1);
  xi.data = {0.5, -1.0, 0.0};
  const double ls = -10.0 + 6.0 * (std::tanh(raw) + 1.0);
  double mean_logp = 0.0;
  for (double x : xi.data) {
    const double a = std::tanh(std::exp(ls) * x);
    mean_logp += (-0.5 * x * x - ls - 0.5 * std::log(2.0 * std::numbers::pi) -
                  std::log(1.0 - a * a)) / 3.0;
  }
  const ActorLoss al = actor_loss(agent, b, xi);
  EXPECT_NEAR(al.mean_log_prob, mean_logp, 1e-12);

  const double alpha = agent.alpha();
  const double g = alpha * (-mean_logp - (-1.0));
  const double lr = agent.config.alpha_lr;
  const double expected = agent.log_alpha - lr * g / (std::abs(g) + 1e-8);
  temperature_update(agent, al.mean_log_prob);
  EXPECT_NEAR(agent.log_alpha, expected, 1e-15);
}

TEST(SacUpdate, AlphaStaysPositive) {
  Rng rng(13);
  SacConfig cfg = small_config();
  cfg.alpha_lr = 0.5;
  SacAgent agent = make_agent(3, 2, cfg, rng);
  for (int i = 0; i < 200; ++i) {
    const UpdateMetrics m = sac_update(agent, random_batch(rng, 16, 3, 2), rng);
    ASSERT_GT(m.alpha, 0.0);
    ASSERT_TRUE(std::isfinite(m.critic_loss));
  }
  EXPECT_EQ(agent.critic_updates, 200);
  EXPECT_EQ(agent.actor_updates, 200);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(14);
  SacAgent agent = make_agent(3, 2, small_config(), rng);
  for (int i = 0; i < 5; ++i) sac_update(agent, random_batch(rng, 8, 3, 2), rng);
  const auto path = std::filesystem::temp_directory_path() / "pebble_sac_ckpt.bin";
  save_checkpoint(agent, path);
  Rng other(99);
  SacAgent back = make_agent(3, 2, small_config(), other);
  load_checkpoint(back, path);
  const auto same = [](std::span<const double> a, std::span<const double> b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
  };
  EXPECT_TRUE(same(agent.policy.parameters(), back.policy.parameters()));
  EXPECT_TRUE(same(agent.q2_target.parameters(), back.q2_target.parameters()));
  EXPECT_EQ(agent.q1_opt.m, back.q1_opt.m);
  EXPECT_EQ(agent.log_alpha, back.log_alpha);
  EXPECT_EQ(agent.policy_opt.t, back.policy_opt.t);

  SacAgent wrong = make_agent(3, 2, small_config({4}), other);
  EXPECT_THROW(load_checkpoint(wrong, path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(ResetCritics, KeepsActorAndTemperature) {
  Rng rng(15);
  SacAgent agent = make_agent(3, 2, small_config(), rng);
  for (int i = 0; i < 5; ++i) sac_update(agent, random_batch(rng, 8, 3, 2), rng);
  const SacAgent before = agent;
  reset_critics(agent, rng);
  const auto params = [](const nn::Mlp& m) {
    return std::vector<double>(m.parameters().begin(), m.parameters().end());
  };
  EXPECT_EQ(params(agent.policy), params(before.policy));
  EXPECT_EQ(agent.policy_opt.m, before.policy_opt.m);
  EXPECT_EQ(agent.log_alpha, before.log_alpha);
  EXPECT_NE(params(agent.q1), params(before.q1));
  EXPECT_NE(params(agent.q1), params(agent.q2));
  EXPECT_EQ(params(agent.q1_target), params(agent.q1));
  EXPECT_EQ(params(agent.q2_target), params(agent.q2));
  EXPECT_EQ(agent.q1_opt.t, 0);
  EXPECT_EQ(agent.q2_opt.m, std::vector<double>(agent.q2.parameter_count(), 0.0));
}

// True-reward SAC on pendulum improves from its untrained evaluation.
TEST(SacLearning, PendulumImprovesOverFiveSeeds) {
  std::vector<double> initial, final;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    run::RunConfig cfg;
    cfg.env = "pendulum";
    cfg.seed = seed;
    cfg.total_steps = 8000;
    cfg.eval_interval = 1000;
    cfg.eval_episodes = 5;
    cfg.output_dir = "";
    const run::RunRecord rec = run::run_sac_oracle(cfg);
    ASSERT_EQ(rec.curve.size(), 8u);
    initial.push_back(rec.curve.front().true_return);
    final.push_back(rec.curve.back().true_return);
  }
  EXPECT_GE(testing::median(final) - testing::median(initial), 0.3)
      << "initial " << testing::median(initial) << " final " << testing::median(final);
}

}  // namespace
}  // namespace pebble::sac
