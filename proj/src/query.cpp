// SPDX-License-Identifier: Apache-2.0

#include "pebble/query.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pebble/errors.hpp"

namespace pebble::query {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kUniform: return "uniform";
    case Scheme::kDisagreement: return "disagreement";
    case Scheme::kEntropy: return "entropy";
  }
  return "uniform";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "uniform") return Scheme::kUniform;
  if (name == "disagreement") return Scheme::kDisagreement;
  if (name == "entropy") return Scheme::kEntropy;
  throw ContractError("unknown sampling scheme: " + name);
}

std::vector<QueryCandidate> generate_candidates(const replay::ReplayBuffer& buffer,
                                                const reward::RewardEnsemble& ens,
                                                std::size_t pool_size, std::size_t h, Rng& rng) {
  std::vector<QueryCandidate> pool;
  pool.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) {
    QueryCandidate c;
    c.seg0 = buffer.sample_segment(h, rng);
    c.seg1 = buffer.sample_segment(h, rng);
    for (std::size_t m = 0; m < ens.size(); ++m) {
      c.member_probs.push_back(reward::preference_prob(ens.member(m), c.seg0, c.seg1));
    }
    pool.push_back(std::move(c));
  }
  return pool;
}

double mean_probability(const QueryCandidate& cand) {
  if (cand.member_probs.empty()) throw ContractError("candidate has no member probabilities");
  return std::accumulate(cand.member_probs.begin(), cand.member_probs.end(), 0.0) /
         static_cast<double>(cand.member_probs.size());
}

double score_disagreement(const QueryCandidate& cand) {
  const auto& p = cand.member_probs;
  if (p.size() < 2) throw ContractError("score_disagreement: needs at least two members");
  const double mean = mean_probability(cand);
  double var = 0.0;
  for (double v : p) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(p.size()));
}

double score_entropy(const QueryCandidate& cand) {
  const double p = std::clamp(mean_probability(cand), 1e-12, 1.0 - 1e-12);
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

std::vector<std::size_t> select_indices(const std::vector<QueryCandidate>& pool, std::size_t m,
                                        Scheme scheme, Rng& rng) {
  if (pool.size() < m) {
    throw ContractError("select_queries: pool of " + std::to_string(pool.size()) +
                        " is smaller than M=" + std::to_string(m));
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (scheme == Scheme::kUniform) {
    // Partial Fisher-Yates: the first m slots are a uniform draw without replacement.
    for (std::size_t i = 0; i < m; ++i) {
      std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    }
    idx.resize(m);
    return idx;
  }
  std::vector<double> scores(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scores[i] = scheme == Scheme::kDisagreement ? score_disagreement(pool[i])
                                                : score_entropy(pool[i]);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(m);
  return idx;
}

std::vector<QueryCandidate> select_queries(std::vector<QueryCandidate> pool, std::size_t m,
                                           Scheme scheme, Rng& rng) {
  const std::vector<std::size_t> idx = select_indices(pool, m, scheme, rng);
  std::vector<QueryCandidate> out;
  out.reserve(m);
  for (std::size_t i : idx) {
    QueryCandidate c = std::move(pool[i]);
    if (scheme == Scheme::kDisagreement) c.score = score_disagreement(c);
    if (scheme == Scheme::kEntropy) c.score = score_entropy(c);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pebble::query
