#pragma once

#include <map>
#include <string>
#include <vector>

#include "simpletir/grpo.hpp"

namespace simpletir {

struct FilterStats {
  std::size_t filtered_trajectories = 0;
  std::size_t masked_tokens = 0;
  std::map<std::string, std::size_t> reasons;
};

// A decision layer over an update batch: trajectory keep bits and optional
// per-token mask clears. Never mutates trajectories.
struct FilterDecision {
  std::vector<std::uint8_t> keep;                         // per trajectory
  std::vector<std::vector<std::uint8_t>> token_live;      // per trajectory, per response token
  FilterStats stats;
};

FilterDecision identity_decision(const UpdateBatch& batch);

// keep[i] = 0 iff trajectory i contains at least one void turn.
FilterDecision simpletir_filter(const UpdateBatch& batch);

// Clears mask bits of response tokens whose old logprob falls below the
// batch q-quantile; ties broken by position, earliest masked first.
FilterDecision low_prob_token_filter(const UpdateBatch& batch, double quantile);

// Clears mask bits of tokens whose importance ratio under the current policy
// exceeds the threshold.
FilterDecision high_ratio_token_filter(const UpdateBatch& batch, const Policy& policy,
                                       double temperature, double threshold);

// Identity: the explicit "stop generation without filtering" ablation arm.
FilterDecision stop_without_filter(const UpdateBatch& batch);

// ANDs keep bits and token liveness of two decisions.
FilterDecision compose(const FilterDecision& a, const FilterDecision& b);

struct FilterOptions {
  double low_prob_quantile = 0.02;
  double high_ratio_threshold = 5.0;
};

// Strategy string: "simpletir" | "low_prob" | "high_ratio" | "none", or a
// comma-separated composition.
FilterDecision apply_filter_strategy(const std::string& strategy, const UpdateBatch& batch,
                                     const Policy& policy, double temperature,
                                     const FilterOptions& options);

// Writes the decision into the batch's keep/live fields.
void apply_decision(UpdateBatch& batch, const FilterDecision& decision);

}  // namespace simpletir
