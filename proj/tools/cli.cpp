// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "pebble/errors.hpp"
#include "pebble/http_api.hpp"
#include "pebble/run.hpp"
#include "pebble/sac.hpp"
#include "pebble/teacher.hpp"

namespace pebble::cli {

namespace {

using run::RunConfig;

/// RunConfig flags of one subcommand. Applied on top of defaults and --config,
/// and only when given on the command line.
struct Overrides {
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> items;
  CLI::Option* env_opt = nullptr;
  std::string config_path;

  template <typename T, typename Set>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& help, Set set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    items.emplace_back(opt, [value, set](RunConfig& c) { set(c, *value); });
    return opt;
  }

  template <typename Set>
  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& help, Set set) {
    CLI::Option* opt = app->add_flag(name, help);
    items.emplace_back(opt, [set](RunConfig& c) { set(c); });
    return opt;
  }

  // Returns false when no environment was chosen anywhere.
  bool resolve(RunConfig& cfg) const {
    bool env_given = false;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ContractError("cannot open config " + config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ContractError("config " + config_path + ": " + e.what());
      }
      cfg = run::config_from_json(j, cfg);
      env_given = j.is_object() && j.contains("env");
    }
    for (const auto& [opt, apply] : items) {
      if (opt->count() > 0) apply(cfg);
    }
    return env_given || env_opt->count() > 0;
  }
};

void add_run_flags(CLI::App* app, Overrides& ov) {
  app->add_option("--config", ov.config_path, "JSON file overriding the defaults")
      ->check(CLI::ExistingFile);
  ov.env_opt = ov.add<std::string>(app, "--env", "pointmass2d | pendulum",
                                   [](RunConfig& c, const std::string& v) { c.env = v; })
                   ->check(CLI::IsMember({"pointmass2d", "pendulum"}));
  ov.add<std::uint64_t>(app, "--seed", "Run seed",
                        [](RunConfig& c, std::uint64_t v) { c.seed = v; });
  ov.add<std::int64_t>(app, "--pretrain-steps", "Unsupervised pre-training steps",
                       [](RunConfig& c, std::int64_t v) { c.pretrain_steps = v; });
  ov.add<std::string>(app, "--pretrain-mode", "entropy | random",
                      [](RunConfig& c, const std::string& v) {
                        c.pretrain_mode = v == "random" ? run::PretrainMode::kRandom
                                                        : run::PretrainMode::kEntropy;
                      })
      ->check(CLI::IsMember({"entropy", "random"}));
  ov.add<std::int64_t>(app, "--total-steps", "Environment steps including pre-training",
                       [](RunConfig& c, std::int64_t v) { c.total_steps = v; });
  ov.add<std::int64_t>(app, "--learning-starts", "Buffer size before SAC updates begin",
                       [](RunConfig& c, std::int64_t v) { c.learning_starts = v; });
  ov.add<std::int64_t>(app, "-K,--feedback-interval", "Policy steps between sessions",
                       [](RunConfig& c, std::int64_t v) { c.feedback_interval = v; });
  ov.add<std::int64_t>(app, "-M,--queries-per-session", "Queries per session",
                       [](RunConfig& c, std::int64_t v) { c.queries_per_session = v; });
  ov.add<std::int64_t>(app, "--budget", "Total query budget",
                       [](RunConfig& c, std::int64_t v) { c.budget = v; });
  ov.add<std::int64_t>(app, "-H,--segment-len", "Segment length",
                       [](RunConfig& c, std::int64_t v) { c.segment_len = v; });
  ov.add<std::string>(app, "--scheme", "uniform | disagreement | entropy",
                      [](RunConfig& c, const std::string& v) {
                        c.scheme = query::scheme_from_name(v);
                      })
      ->check(CLI::IsMember({"uniform", "disagreement", "entropy"}));
  ov.add<std::int64_t>(app, "--pool-multiplier", "Candidate pool size as a multiple of M",
                       [](RunConfig& c, std::int64_t v) { c.pool_multiplier = v; });
  ov.add<std::size_t>(app, "--ensemble-size", "Reward ensemble members",
                      [](RunConfig& c, std::size_t v) { c.reward.ensemble_size = v; });
  ov.add<std::size_t>(app, "--knn-k", "k for the entropy estimate",
                      [](RunConfig& c, std::size_t v) { c.knn_k = v; });
  ov.flag(app, "--no-relabel", "Keep stored rewards frozen after sessions",
          [](RunConfig& c) { c.relabel = false; });
  ov.add<std::string>(app, "--teacher", "scripted | human",
                      [](RunConfig& c, const std::string& v) {
                        c.teacher = v == "human" ? run::TeacherKind::kHuman
                                                 : run::TeacherKind::kScripted;
                      })
      ->check(CLI::IsMember({"scripted", "human"}));
  ov.add<double>(app, "--teacher-eps", "Scripted indifference margin",
                 [](RunConfig& c, double v) { c.teacher_eps = v; });
  ov.add<double>(app, "--human-timeout", "Seconds to wait for a human session",
                 [](RunConfig& c, double v) { c.human_timeout_s = v; });
  ov.add<std::int64_t>(app, "--eval-interval", "Steps between evaluations",
                       [](RunConfig& c, std::int64_t v) { c.eval_interval = v; });
  ov.add<std::int64_t>(app, "--eval-episodes", "Episodes per evaluation",
                       [](RunConfig& c, std::int64_t v) { c.eval_episodes = v; });
  ov.add<std::uint64_t>(app, "--eval-seed", "Seed of the evaluation episodes",
                        [](RunConfig& c, std::uint64_t v) { c.eval_seed = v; });
  ov.add<double>(app, "--reward-lr", "Reward model learning rate",
                 [](RunConfig& c, double v) { c.reward.lr = v; });
  ov.add<int>(app, "--reward-epochs", "Epoch cap per session",
              [](RunConfig& c, int v) { c.reward.max_epochs = v; });
  ov.add<std::size_t>(app, "--sac-batch", "SAC batch size",
                      [](RunConfig& c, std::size_t v) { c.sac.batch_size = v; });
  ov.flag(app, "--verify-relabel", "Check every stored reward after relabeling",
          [](RunConfig& c) { c.verify_relabel = true; });
  ov.add<std::string>(app, "--output-dir", "Parent directory for run directories",
                      [](RunConfig& c, const std::string& v) { c.output_dir = v; });
}

void report(std::ostream& out, const std::string& label, const run::RunRecord& r) {
  out << label << ": final_return=" << std::setprecision(6) << r.final_return
      << " queries_used=" << r.queries_used << " labeled=" << r.labeled_queries
      << " sessions=" << r.sessions << " seconds=" << std::setprecision(4) << r.seconds;
  if (!r.run_dir.empty()) out << " dir=" << r.run_dir.string();
  out << '\n';
}

struct AblateVariant {
  std::string name;
  std::function<void(RunConfig&)> apply;
};

std::vector<AblateVariant> ablation_variants(const std::string& axis, const RunConfig& base) {
  if (axis == "relabel") {
    return {{"relabel=on", [](RunConfig& c) { c.relabel = true; }},
            {"relabel=off", [](RunConfig& c) { c.relabel = false; }}};
  }
  if (axis == "pretrain") {
    return {{"pretrain=entropy", [](RunConfig& c) { c.pretrain_mode = run::PretrainMode::kEntropy; }},
            {"pretrain=random", [](RunConfig& c) { c.pretrain_mode = run::PretrainMode::kRandom; }}};
  }
  if (axis == "scheme") {
    std::vector<AblateVariant> v;
    for (auto s : {query::Scheme::kUniform, query::Scheme::kDisagreement, query::Scheme::kEntropy}) {
      v.push_back({"scheme=" + query::scheme_name(s), [s](RunConfig& c) { c.scheme = s; }});
    }
    return v;
  }
  std::vector<AblateVariant> v;
  const int len = env::env_spec(env::env_from_name(base.env)).episode_length;
  for (std::int64_t h : {1, 10, 50}) {
    if (h > len) continue;
    v.push_back({"segment_len=" + std::to_string(h), [h](RunConfig& c) { c.segment_len = h; }});
  }
  return v;
}

int usage_error(std::ostream& err, const CLI::App& app, const std::string& msg) {
  err << "error: " << msg << "\n\n" << app.help();
  return kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference-based RL with unsupervised pre-training and relabeling", "pebble"};
  app.require_subcommand(1);

  std::deque<Overrides> overrides;
  const auto run_command = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    overrides.emplace_back();
    add_run_flags(sub, overrides.back());
    return sub;
  };

  CLI::App* pretrain = run_command("pretrain", "Entropy pre-training only");
  CLI::App* train = run_command("train", "Full run with a scripted or human teacher");
  CLI::App* oracle = run_command("oracle", "SAC on the ground-truth reward");
  CLI::App* serve = run_command("serve", "Human-teacher run behind the HTTP API");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Bind port (0 picks a free one)");
  CLI::App* ablate = run_command("ablate", "Sweep one switch, everything else fixed");
  std::string axis;
  int num_seeds = 1;
  ablate->add_option("--axis", axis, "relabel | pretrain | scheme | segment")
      ->required()
      ->check(CLI::IsMember({"relabel", "pretrain", "scheme", "segment"}));
  ablate->add_option("--num-seeds", num_seeds, "Seeds per variant, counting up from --seed")
      ->check(CLI::PositiveNumber);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a saved run's final agent");
  std::string run_dir;
  std::int64_t episodes = 0;
  std::uint64_t eval_seed = 0;
  eval->add_option("--run-dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  CLI::Option* episodes_opt = eval->add_option("--episodes", episodes, "Episodes");
  CLI::Option* seed_opt = eval->add_option("--seed", eval_seed, "Evaluation seed");

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << '\n';
      return kExitOk;
    }
    return usage_error(err, app, e.what());
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen == eval) {
    try {
      RunConfig cfg = run::load_config(std::filesystem::path(run_dir) / "config.json");
      const env::EnvId id = env::env_from_name(cfg.env);
      const env::EnvSpec& spec = env::env_spec(id);
      Rng rng(0);
      sac::SacAgent agent = sac::make_agent(spec.obs_dim, spec.action_dim, cfg.sac, rng);
      sac::load_checkpoint(agent, std::filesystem::path(run_dir) / "checkpoints" / "agent.bin");
      const std::int64_t n = episodes_opt->count() ? episodes : cfg.eval_episodes;
      const std::uint64_t s = seed_opt->count() ? eval_seed : cfg.eval_seed;
      out << "mean_return=" << std::setprecision(8) << run::evaluate(agent, id, n, s) << '\n';
      return kExitOk;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitRunFailure;
    }
  }

  const std::size_t which = chosen == pretrain ? 0 : chosen == train ? 1 : chosen == oracle ? 2
                                                 : chosen == serve   ? 3 : 4;
  RunConfig cfg;
  try {
    if (!overrides[which].resolve(cfg)) {
      return usage_error(err, *chosen, "an environment is required (--env or \"env\" in --config)");
    }
    if (chosen == serve) cfg.teacher = run::TeacherKind::kHuman;
    if (chosen == oracle) cfg.pretrain_steps = 0;
    run::validate(cfg);
  } catch (const ContractError& e) {
    return usage_error(err, *chosen, e.what());
  }

  try {
    if (chosen == pretrain) {
      report(out, "pretrain", run::run_pretrain(cfg));
    } else if (chosen == train) {
      if (cfg.teacher == run::TeacherKind::kHuman) {
        return usage_error(err, *chosen, "use `serve` for a human teacher");
      }
      report(out, "train", run::run_pebble(cfg));
    } else if (chosen == oracle) {
      report(out, "oracle", run::run_sac_oracle(cfg));
    } else if (chosen == serve) {
      teacher::QueryQueue queue;
      api::StatusBoard board;
      api::ApiServer server(queue, board);
      const int bound = server.start(host, port);
      out << "listening on http://" << host << ':' << bound << std::endl;
      run::RunContext ctx{&queue, &board, ""};
      const run::RunRecord r = run::run_pebble(cfg, ctx);
      server.stop();
      report(out, "serve", r);
    } else {
      const auto variants = ablation_variants(axis, cfg);
      for (const auto& v : variants) {
        for (int s = 0; s < num_seeds; ++s) {
          RunConfig c = cfg;
          v.apply(c);
          c.seed = cfg.seed + static_cast<std::uint64_t>(s);
          run::validate(c);
          report(out, v.name + " seed=" + std::to_string(c.seed), run::run_pebble(c));
        }
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRunFailure;
  }
  return kExitOk;
}

}  // namespace pebble::cli
