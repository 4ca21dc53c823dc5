#pragma once

#include <string>
#include <vector>

#include "simpletir/policy.hpp"
#include "simpletir/rng.hpp"
#include "simpletir/trajectory.hpp"
#include "simpletir/vocab.hpp"

namespace simpletir {

struct Task {
  std::string id;
  std::string prompt_body;
  double expected_answer = 0.0;
  int difficulty = 1;
};

std::vector<Task> read_tasks_json(const std::string& path);
void write_tasks_json(const std::string& path, const std::vector<Task>& tasks);

struct RolloutLimits {
  int max_turns = 5;
  int max_tokens_per_turn = 256;
  int max_response_tokens = 1024;
  double temperature = 1.0;
  std::int64_t sandbox_step_limit = kDefaultStepLimit;
  std::size_t feedback_char_limit = kDefaultFeedbackCharLimit;
};

struct GroupBatch {
  Task task;
  std::vector<Trajectory> trajectories;
  std::vector<double> advantages;   // unset until compute_advantages
  std::vector<std::uint8_t> keep;   // 1 = contributes to the update
};

// Fixed instruction template + task body. No chat template tokens.
std::string build_prompt(const Task& task);
const std::string& prompt_template();

// Samples one turn autoregressively, appending sampled ids to flat_ids.
// Stops at the first of: complete code block, complete \boxed{...} answer,
// eos, or token_budget.
TurnRecord generate_turn(const Policy& policy, const Vocabulary& vocab,
                         std::vector<int>& flat_ids, double temperature,
                         int token_budget, Rng& rng);

Trajectory run_trajectory(const Policy& policy, const Vocabulary& vocab, const Task& task,
                          const RolloutLimits& limits, Rng& rng);

// 1.0 when the trajectory's answer matches the task within relative
// tolerance, else 0.0.
double compute_reward(const Trajectory& trajectory, const Task& task);

// G independent trajectories with substreams derived from (rng, task.id, i);
// rewards assigned, advantages unset, keep all-1.
GroupBatch sample_group(const Policy& policy, const Vocabulary& vocab, const Task& task, int G,
                        const RolloutLimits& limits, const Rng& rng, int num_workers = 1);

// Random arithmetic tasks; expected answers come from the sandbox itself.
std::vector<Task> generate_tasks(int count, int difficulty, Rng& rng);

}  // namespace simpletir
