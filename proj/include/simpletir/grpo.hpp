#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "simpletir/policy.hpp"
#include "simpletir/rollout.hpp"

namespace simpletir {

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
  double learning_rate = 1e-6;
  double grad_clip_norm = 1.0;
  int ppo_epochs = 4;
  double adv_norm_epsilon = 1e-6;
};

struct UpdateReport {
  double objective_value = 0.0;
  double grad_norm_preclip = 0.0;
  double grad_norm_postclip = 0.0;
  std::size_t tokens_used = 0;
  std::size_t trajectories_kept = 0;
  double clipped_token_fraction = 0.0;
  std::size_t ratio_clamp_count = 0;  // exponent clamp engaged
};

struct DegenerateBatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Group-relative advantages: (r - mean) / max(pop_std, epsilon); the zero
// vector when all rewards are equal.
std::vector<double> compute_advantages(std::span<const double> rewards, double epsilon);

// exp(new_logprob - old_logprob) with the exponent clamped to +-50.
double importance_ratio(double new_logprob, double old_logprob, bool* clamped = nullptr);

struct TokenObjective {
  double value;
  bool gate;  // derivative w.r.t. ratio is nonzero
};
TokenObjective clipped_token_objective(double ratio, double advantage, const ClipConfig& clip);

// One trajectory flattened for the update: token ids (prompt included, for
// context lookup), response-token positions with rollout-time logprobs, and
// the post-filter liveness of each response token.
struct FlatTrajectory {
  std::vector<int> ids;
  std::size_t prompt_len = 0;
  struct ResponseToken {
    std::size_t pos;  // index into ids
    double old_logprob;
  };
  std::vector<ResponseToken> response;
  std::vector<std::uint8_t> live;  // parallel to response
  double advantage = 0.0;
  std::uint8_t keep = 1;
  double reward = 0.0;
  int void_turns = 0;
  std::size_t live_count() const;
};

struct UpdateBatch {
  std::vector<FlatTrajectory> trajectories;
  std::size_t kept_count() const;
};

FlatTrajectory flatten_trajectory(const Trajectory& t, const Vocabulary& vocab);
UpdateBatch build_update_batch(const std::vector<GroupBatch>& groups, const Vocabulary& vocab);

// Masked clipped surrogate over kept trajectories, fresh logprobs from the
// current policy, mean taken over kept trajectories only.
double batch_objective(const UpdateBatch& batch, const Policy& policy, double temperature,
                       const ClipConfig& clip);

// Exact analytic gradient of batch_objective w.r.t. policy parameters.
// Fills grad (cleared first) and reports objective, pre-clip norm, clip stats.
UpdateReport batch_gradient(const UpdateBatch& batch, const Policy& policy, double temperature,
                            const ClipConfig& clip, GradBuffer& grad);

// Global-norm clip then ascent step; returns the report updated with the
// post-clip norm. Throws NonFiniteGradient without touching the policy.
void apply_update(Policy& policy, GradBuffer& grad, const ClipConfig& clip,
                  UpdateReport& report);

}  // namespace simpletir
