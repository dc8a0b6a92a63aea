// SPDX-License-Identifier: Apache-2.0
// Candidate segment pairs and the uniform / disagreement / entropy selectors.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pebble/replay.hpp"
#include "pebble/reward_model.hpp"
#include "pebble/rng.hpp"

namespace pebble::query {

enum class Scheme { kUniform, kDisagreement, kEntropy };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct QueryCandidate {
  replay::Segment seg0;
  replay::Segment seg1;
  std::vector<double> member_probs;  // P_m[seg1 > seg0] per ensemble member
  double score = 0.0;
};

/// pool_size independent pairs, two sample_segment draws each. Propagates
/// NoValidSegment.
std::vector<QueryCandidate> generate_candidates(const replay::ReplayBuffer& buffer,
                                                const reward::RewardEnsemble& ens,
                                                std::size_t pool_size, std::size_t h, Rng& rng);

// Population standard deviation of the member probabilities; needs >= 2 members.
double score_disagreement(const QueryCandidate& cand);
// Binary entropy (nats) of the mean member probability.
double score_entropy(const QueryCandidate& cand);
double mean_probability(const QueryCandidate& cand);

/// Uniform: m draws without replacement. Disagreement/entropy: the m highest
/// scores, ties keeping pool order. Throws ContractError when pool.size() < m.
std::vector<std::size_t> select_indices(const std::vector<QueryCandidate>& pool, std::size_t m,
                                        Scheme scheme, Rng& rng);
std::vector<QueryCandidate> select_queries(std::vector<QueryCandidate> pool, std::size_t m,
                                           Scheme scheme, Rng& rng);

}  // namespace pebble::query
