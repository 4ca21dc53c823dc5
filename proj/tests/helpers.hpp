#pragma once

// Shared fixtures: a small but real rollout batch with advantages set, and a
// policy nudged off the rollout snapshot so importance ratios differ from 1.

#include <span>
#include <vector>

#include "simpletir/trainer.hpp"

namespace testutil {

using namespace simpletir;

inline RunConfig small_config(std::uint64_t seed = 0) {
  RunConfig rc = default_config();
  rc.run.seed = seed;
  rc.run.group_size = 4;
  rc.run.tasks_per_step = 2;
  rc.tasks.depth1 = 2;
  rc.tasks.depth2 = 1;
  rc.tasks.depth3 = 1;
  rc.policy.demo_count = 64;
  rc.rollout.max_turns = 3;
  rc.rollout.max_tokens_per_turn = 64;
  rc.rollout.max_response_tokens = 192;
  rc.paths.out_dir = "test_out";
  return rc;
}

inline RolloutLimits limits_from(const RunConfig& rc) {
  RolloutLimits lim;
  lim.max_turns = rc.rollout.max_turns;
  lim.max_tokens_per_turn = rc.rollout.max_tokens_per_turn;
  lim.max_response_tokens = rc.rollout.max_response_tokens;
  lim.temperature = rc.rollout.temperature;
  lim.sandbox_step_limit = rc.rollout.sandbox_step_limit;
  lim.feedback_char_limit = static_cast<std::size_t>(rc.rollout.feedback_char_limit);
  return lim;
}

struct BatchFixture {
  RunConfig config;
  Vocabulary vocab;
  Policy policy;
  UpdateBatch batch;
  RolloutLimits limits;
};

// Rolls out every task of the small config once. All-equal-reward groups get
// synthetic gaussian advantages so the objective is non-trivial; `perturb`
// moves the sampled tokens' weight slots so new != old.
inline BatchFixture make_batch(std::uint64_t seed, double perturb = 0.01,
                               bool synth_advantages = true) {
  RunConfig rc = small_config(seed);
  Vocabulary vocab = vocab_from_spec(rc.policy.alphabet);
  Rng root(seed);
  Policy policy = init_policy(rc, vocab, root);
  auto tasks = build_train_tasks(rc, root);
  RolloutLimits lim = limits_from(rc);

  Rng roll = root.substream(hash_bytes("rollout"), 0);
  std::vector<GroupBatch> groups;
  for (const auto& task : tasks) {
    GroupBatch g = sample_group(policy, vocab, task, rc.run.group_size, lim, roll);
    std::vector<double> rewards;
    for (const auto& t : g.trajectories) rewards.push_back(t.reward);
    g.advantages = compute_advantages(rewards, rc.optim.adv_norm_epsilon);
    groups.push_back(std::move(g));
  }
  UpdateBatch batch = build_update_batch(groups, vocab);

  if (synth_advantages) {
    Rng synth = root.substream(hash_bytes("synth_adv"));
    for (auto& t : batch.trajectories) {
      if (t.advantage == 0.0) t.advantage = synth.next_gaussian();
    }
  }
  if (perturb > 0.0) {
    Rng prng = root.substream(hash_bytes("perturb"));
    std::vector<std::size_t> slots;
    for (const auto& t : batch.trajectories) {
      for (const auto& r : t.response) {
        ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), r.pos));
        policy.slots_for(ctx, t.ids[r.pos], slots);
        for (std::size_t s : slots) policy.weight_at(s) += perturb * prng.next_gaussian();
      }
    }
  }
  return {std::move(rc), std::move(vocab), std::move(policy), std::move(batch), lim};
}

}  // namespace testutil
