// SPDX-License-Identifier: Apache-2.0

#include "pebble/reward_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "pebble/errors.hpp"

namespace pebble::reward {
namespace {

using nlohmann::json;

json matrix_to_json(const nn::Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

nn::Matrix matrix_from_json(const json& rows) {
  if (!rows.is_array()) throw ContractError("expected an array of rows");
  const std::size_t n = rows.size();
  const std::size_t cols = n == 0 ? 0 : rows[0].size();
  nn::Matrix m(n, cols);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != cols) throw ContractError("ragged matrix in record");
    for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = rows[r][c].get<double>();
  }
  return m;
}

json segment_to_json(const replay::Segment& s) {
  return json{{"episode_id", s.episode_id},
              {"start", s.start},
              {"states", matrix_to_json(s.states)},
              {"actions", matrix_to_json(s.actions)}};
}

replay::Segment segment_from_json(const json& j) {
  replay::Segment s;
  s.episode_id = j.at("episode_id").get<std::int64_t>();
  s.start = j.at("start").get<std::size_t>();
  s.states = matrix_from_json(j.at("states"));
  s.actions = matrix_from_json(j.at("actions"));
  return s;
}

void append_segment_rows(nn::Matrix& inputs, std::size_t& row, const replay::Segment& seg) {
  for (std::size_t t = 0; t < seg.length(); ++t) {
    auto dst = inputs.row(row++);
    const auto s = seg.states.row(t);
    const auto a = seg.actions.row(t);
    std::copy(s.begin(), s.end(), dst.begin());
    std::copy(a.begin(), a.end(), dst.begin() + static_cast<std::ptrdiff_t>(s.size()));
  }
}

}  // namespace

bool Label::is_valid() const {
  return (*this == kPreferFirst) || (*this == kPreferSecond) || (*this == kIndifferent);
}

RewardEnsemble::RewardEnsemble(std::size_t state_dim, std::size_t action_dim,
                               const RewardModelConfig& config, Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim), config_(config) {
  if (config.ensemble_size == 0) throw ContractError("RewardEnsemble: empty ensemble");
  std::vector<std::size_t> sizes{state_dim + action_dim};
  std::vector<nn::Activation> acts;
  for (std::size_t h : config.hidden) {
    sizes.push_back(h);
    acts.push_back(nn::Activation::kLeakyRelu);
  }
  sizes.push_back(1);
  acts.push_back(nn::Activation::kTanh);
  for (std::size_t i = 0; i < config.ensemble_size; ++i) {
    Rng member_rng = rng.fork();
    members_.emplace_back(sizes, acts, member_rng);
    optimizers_.emplace_back(members_.back().parameter_count(), nn::AdamConfig{config.lr});
  }
}

nn::Matrix reward_inputs(const nn::Matrix& states, const nn::Matrix& actions) {
  if (states.rows != actions.rows) throw ContractError("reward_inputs: row mismatch");
  nn::Matrix in(states.rows, states.cols + actions.cols);
  for (std::size_t r = 0; r < states.rows; ++r) {
    auto dst = in.row(r);
    const auto s = states.row(r);
    const auto a = actions.row(r);
    std::copy(s.begin(), s.end(), dst.begin());
    std::copy(a.begin(), a.end(), dst.begin() + static_cast<std::ptrdiff_t>(states.cols));
  }
  return in;
}

std::vector<double> predict_rewards(const RewardEnsemble& ens, const nn::Matrix& states,
                                    const nn::Matrix& actions) {
  if (states.cols != ens.state_dim() || actions.cols != ens.action_dim()) {
    throw ContractError("predict_rewards: dimension mismatch");
  }
  const nn::Matrix in = reward_inputs(states, actions);
  std::vector<double> sum(states.rows, 0.0);
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const nn::Matrix out = nn::mlp_forward(ens.member(m), in);
    for (std::size_t r = 0; r < sum.size(); ++r) sum[r] += out.data[r];
  }
  const double inv = 1.0 / static_cast<double>(ens.size());
  for (double& v : sum) v *= inv;
  return sum;
}

double predict_reward(const RewardEnsemble& ens, std::span<const double> state,
                      std::span<const double> action) {
  nn::Matrix s(1, state.size());
  nn::Matrix a(1, action.size());
  std::copy(state.begin(), state.end(), s.data.begin());
  std::copy(action.begin(), action.end(), a.data.begin());
  return predict_rewards(ens, s, a).front();
}

double bt_probability(double return0, double return1) {
  const double m = std::max(return0, return1);
  const double e0 = std::exp(return0 - m);
  const double e1 = std::exp(return1 - m);
  return e1 / (e0 + e1);
}

double bt_cross_entropy(double return0, double return1, const Label& label) {
  const double m = std::max(return0, return1);
  const double lse = m + std::log(std::exp(return0 - m) + std::exp(return1 - m));
  return -(label.y0 * (return0 - lse) + label.y1 * (return1 - lse));
}

double segment_return(const nn::Mlp& member, const replay::Segment& seg) {
  const nn::Matrix out = nn::mlp_forward(member, reward_inputs(seg.states, seg.actions));
  return std::accumulate(out.data.begin(), out.data.end(), 0.0);
}

double preference_prob(const nn::Mlp& member, const replay::Segment& seg0,
                       const replay::Segment& seg1) {
  if (seg0.length() != seg1.length()) {
    throw ContractError("preference_prob: segments differ in length");
  }
  return bt_probability(segment_return(member, seg0), segment_return(member, seg1));
}

bool prediction_correct(double p_second, const Label& label) {
  if (label.y1 > label.y0) return p_second > 0.5;
  if (label.y0 > label.y1) return p_second < 0.5;
  return std::abs(p_second - 0.5) < 0.1;
}

PreferenceLoss preference_loss(const nn::Mlp& member,
                               std::span<const PreferenceRecord* const> batch) {
  if (batch.empty()) throw ContractError("preference_loss: empty batch");
  std::size_t rows = 0;
  for (const PreferenceRecord* r : batch) {
    if (r->seg0.length() != r->seg1.length()) {
      throw ContractError("preference_loss: segments differ in length");
    }
    rows += r->seg0.length() + r->seg1.length();
  }
  nn::Matrix inputs(rows, member.input_size());
  std::size_t row = 0;
  for (const PreferenceRecord* r : batch) {
    append_segment_rows(inputs, row, r->seg0);
    append_segment_rows(inputs, row, r->seg1);
  }

  const nn::ForwardTrace trace = nn::mlp_forward_trace(member, inputs);
  nn::Matrix dout(rows, 1);
  PreferenceLoss out;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::size_t correct = 0;
  row = 0;
  for (const PreferenceRecord* r : batch) {
    const std::size_t h = r->seg0.length();
    double ret0 = 0.0, ret1 = 0.0;
    for (std::size_t t = 0; t < h; ++t) ret0 += trace.output.data[row + t];
    for (std::size_t t = 0; t < h; ++t) ret1 += trace.output.data[row + h + t];
    const double p1 = bt_probability(ret0, ret1);
    out.loss += bt_cross_entropy(ret0, ret1, r->label) * inv_n;
    if (prediction_correct(p1, r->label)) ++correct;
    const double g0 = ((1.0 - p1) - r->label.y0) * inv_n;
    const double g1 = (p1 - r->label.y1) * inv_n;
    for (std::size_t t = 0; t < h; ++t) dout.data[row + t] = g0;
    for (std::size_t t = 0; t < h; ++t) dout.data[row + h + t] = g1;
    row += 2 * h;
  }
  if (!std::isfinite(out.loss)) throw NumericError("preference_loss", out.loss);
  out.accuracy = static_cast<double>(correct) * inv_n;
  out.grads.assign(member.parameter_count(), 0.0);
  nn::mlp_backward(member, trace, dout, out.grads, false);
  return out;
}

PreferenceLoss preference_loss(const nn::Mlp& member,
                               const std::vector<PreferenceRecord>& records) {
  std::vector<const PreferenceRecord*> ptrs;
  ptrs.reserve(records.size());
  for (const auto& r : records) ptrs.push_back(&r);
  return preference_loss(member, std::span<const PreferenceRecord* const>(ptrs));
}

SessionMetrics train_session(RewardEnsemble& ens, const std::vector<PreferenceRecord>& dataset,
                             int epochs, std::size_t batch_size, Rng& rng) {
  if (dataset.empty()) throw ContractError("train_session: empty dataset");
  if (batch_size == 0) throw ContractError("train_session: batch size must be positive");
  const std::size_t n = dataset.size();
  const std::size_t members = ens.size();
  std::vector<Rng> shuffles;
  for (std::size_t m = 0; m < members; ++m) shuffles.push_back(rng.fork());

  SessionMetrics metrics;
  std::vector<std::size_t> order(n);
  std::vector<const PreferenceRecord*> batch;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    bool all_converged = true;
    for (std::size_t m = 0; m < members; ++m) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), shuffles[m].engine());
      double member_loss = 0.0;
      double member_correct = 0.0;
      for (std::size_t begin = 0; begin < n; begin += batch_size) {
        const std::size_t end = std::min(n, begin + batch_size);
        batch.clear();
        for (std::size_t i = begin; i < end; ++i) batch.push_back(&dataset[order[i]]);
        const PreferenceLoss pl = preference_loss(ens.member(m), batch);
        const double w = static_cast<double>(end - begin);
        member_loss += pl.loss * w;
        member_correct += pl.accuracy * w;
        nn::adam_step(ens.member(m).parameters(), pl.grads, ens.optimizer(m));
      }
      const double acc = member_correct / static_cast<double>(n);
      loss_sum += member_loss / static_cast<double>(n);
      acc_sum += acc;
      all_converged = all_converged && acc >= ens.config().target_accuracy;
    }
    metrics.final_loss = loss_sum / static_cast<double>(members);
    metrics.train_accuracy = acc_sum / static_cast<double>(members);
    metrics.epochs = epoch + 1;
    if (all_converged) break;
  }
  return metrics;
}

std::string record_to_json_line(const PreferenceRecord& rec) {
  const json j{{"query_id", rec.query_id},
               {"timestamp", rec.timestamp},
               {"source", rec.source},
               {"label", {rec.label.y0, rec.label.y1}},
               {"seg0", segment_to_json(rec.seg0)},
               {"seg1", segment_to_json(rec.seg1)}};
  return j.dump();
}

PreferenceRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  PreferenceRecord rec;
  rec.query_id = j.at("query_id").get<std::uint64_t>();
  rec.timestamp = j.at("timestamp").get<double>();
  rec.source = j.at("source").get<std::string>();
  rec.label = Label{j.at("label").at(0).get<double>(), j.at("label").at(1).get<double>()};
  if (!rec.label.is_valid()) throw ContractError("preference record: invalid label");
  rec.seg0 = segment_from_json(j.at("seg0"));
  rec.seg1 = segment_from_json(j.at("seg1"));
  return rec;
}

void append_records(const std::filesystem::path& path,
                    std::span<const PreferenceRecord> records) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  for (const auto& r : records) os << record_to_json_line(r) << '\n';
}

std::vector<PreferenceRecord> load_records(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<PreferenceRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(record_from_json_line(line));
  }
  return out;
}

}  // namespace pebble::reward
