// SPDX-License-Identifier: Apache-2.0
/**
 * @file   reward_model.hpp
 * @brief  Learned reward: an ensemble of tanh-bounded networks over
 *         (state, action), the Bradley-Terry segment preference probability
 *         and its soft-label cross-entropy training.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pebble/nn.hpp"
#include "pebble/replay.hpp"
#include "pebble/rng.hpp"

namespace pebble::reward {

/// Preference label (y0, y1): (1,0) prefers seg0, (0,1) prefers seg1,
/// (0.5,0.5) is indifference.
struct Label {
  double y0 = 0.5;
  double y1 = 0.5;

  bool operator==(const Label&) const = default;
  bool is_valid() const;
};

inline constexpr Label kPreferFirst{1.0, 0.0};
inline constexpr Label kPreferSecond{0.0, 1.0};
inline constexpr Label kIndifferent{0.5, 0.5};

struct PreferenceRecord {
  replay::Segment seg0;
  replay::Segment seg1;
  Label label;
  std::uint64_t query_id = 0;
  std::string source = "scripted";  // "scripted" | "human"
  double timestamp = 0.0;           // seconds since the Unix epoch
};

struct RewardModelConfig {
  std::size_t ensemble_size = 3;
  std::vector<std::size_t> hidden{256, 256};
  double lr = 3e-4;
  int max_epochs = 200;
  std::size_t batch_size = 64;
  double target_accuracy = 0.97;
};

class RewardEnsemble {
 public:
  RewardEnsemble(std::size_t state_dim, std::size_t action_dim,
                 const RewardModelConfig& config, Rng& rng);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t size() const { return members_.size(); }
  const RewardModelConfig& config() const { return config_; }

  const nn::Mlp& member(std::size_t i) const { return members_.at(i); }
  nn::Mlp& member(std::size_t i) { return members_.at(i); }
  nn::AdamState& optimizer(std::size_t i) { return optimizers_.at(i); }

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  RewardModelConfig config_;
  std::vector<nn::Mlp> members_;
  std::vector<nn::AdamState> optimizers_;
};

/// Network input rows: state || action.
nn::Matrix reward_inputs(const nn::Matrix& states, const nn::Matrix& actions);

/// Ensemble mean of member outputs, in (-1, 1).
double predict_reward(const RewardEnsemble& ens, std::span<const double> state,
                      std::span<const double> action);
/// Row-wise ensemble mean; bit-identical to predict_reward on each row.
std::vector<double> predict_rewards(const RewardEnsemble& ens, const nn::Matrix& states,
                                    const nn::Matrix& actions);

/// P[seg1 > seg0] for summed rewards, computed with max-subtraction.
double bt_probability(double return0, double return1);

double segment_return(const nn::Mlp& member, const replay::Segment& seg);

/// P[seg1 > seg0] under one member. Segments must have equal length.
double preference_prob(const nn::Mlp& member, const replay::Segment& seg0,
                       const replay::Segment& seg1);

/// -(y0 log P[seg0 > seg1] + y1 log P[seg1 > seg0]) given the two returns.
double bt_cross_entropy(double return0, double return1, const Label& label);

/// Whether the prediction agrees with the label: the preferred side gets
/// P > 0.5; indifference counts when |P - 0.5| < 0.1.
bool prediction_correct(double p_second, const Label& label);

struct PreferenceLoss {
  double loss = 0.0;      // batch mean
  double accuracy = 0.0;  // batch fraction of correct predictions
  std::vector<double> grads;
};

PreferenceLoss preference_loss(const nn::Mlp& member,
                               std::span<const PreferenceRecord* const> batch);
PreferenceLoss preference_loss(const nn::Mlp& member,
                               const std::vector<PreferenceRecord>& records);

struct SessionMetrics {
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  int epochs = 0;
};

/// Trains every member on the whole dataset with its own shuffle order until
/// all members reach target_accuracy within an epoch or `epochs` runs out.
/// Returns ensemble-mean metrics of the last epoch. Throws ContractError on an
/// empty dataset.
SessionMetrics train_session(RewardEnsemble& ens, const std::vector<PreferenceRecord>& dataset,
                             int epochs, std::size_t batch_size, Rng& rng);

// ---- JSON-lines persistence ------------------------------------------------

std::string record_to_json_line(const PreferenceRecord& rec);
PreferenceRecord record_from_json_line(const std::string& line);
void append_records(const std::filesystem::path& path,
                    std::span<const PreferenceRecord> records);
std::vector<PreferenceRecord> load_records(const std::filesystem::path& path);

}  // namespace pebble::reward
