#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "simpletir/config.hpp"
#include "simpletir/diagnostics.hpp"
#include "simpletir/filters.hpp"
#include "simpletir/grpo.hpp"
#include "simpletir/rollout.hpp"

namespace simpletir {

Vocabulary vocab_from_spec(const std::string& spec);

// Train set per the config's per-depth counts, or loaded from tasks_file.
std::vector<Task> build_train_tasks(const RunConfig& config, const Rng& root);

// Count-fits the policy on format demonstrations standing in for the
// pretrained base model that Zero RL assumes. Demo responses submit
// ```\nfinal_answer(...)\n``` where the argument is either the demo's own
// question expression (echo demos: the interpreter does the arithmetic) when
// the expression fits inside the widest context window, or digits drawn from
// an independent expression's answer (format only, no answer leakage).
void fit_format_demos(Policy& policy, const Vocabulary& vocab, const RunConfig& config,
                      const Rng& root);

Policy init_policy(const RunConfig& config, const Vocabulary& vocab, const Rng& root);

struct EvalReport {
  std::map<int, double> solve_rate_by_difficulty;
  std::map<int, int> tasks_by_difficulty;
  double overall = 0.0;
  int samples_per_task = 0;
};

EvalReport eval_policy(const Policy& policy, const Vocabulary& vocab,
                       const std::vector<Task>& tasks, int samples_per_task,
                       const RolloutLimits& limits, const Rng& root);

struct AnalyzeReport {
  std::size_t n_trajectories = 0;
  double void_rate = 0.0;
  std::map<int, std::size_t> turn_histogram;
  double p0_token_prob = 1.0;   // minimum
  double p1_token_prob = 1.0;
  double p5_token_prob = 1.0;
  double p50_token_prob = 1.0;
  std::vector<double> per_turn_min_prob;  // mean of per-trajectory turn minima
};

AnalyzeReport analyze_trajectories(const std::vector<Trajectory>& trajectories);

struct StepStats {
  int step = 0;
  double mean_reward = 0.0;
  double mean_response_len = 0.0;
  double mean_turns = 0.0;
  double void_rate = 0.0;
  double filtered_fraction = 0.0;
  std::size_t void_in_update = 0;  // void-containing trajectories that entered the update
  bool skipped = false;            // degenerate batch, no update applied
  bool curriculum_fired = false;
  UpdateReport report;
  double min_token_prob = 1.0;
  double p01_token_prob = 1.0;
};

class Trainer {
 public:
  explicit Trainer(RunConfig config);

  // Returning false from the callback stops the run early.
  using ProgressFn = std::function<bool(const StepStats&)>;

  StepStats step();
  int run(const ProgressFn& progress = nullptr);  // steps completed

  EvalReport evaluate() const;

  const RunConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  Policy& policy() { return policy_; }
  const Policy& policy() const { return policy_; }
  const std::vector<StepStats>& history() const { return history_; }
  const RolloutLimits& limits() const { return limits_; }
  std::string metrics_path() const;
  std::string checkpoint_path(const std::string& name) const;

 private:
  void maybe_advance_curriculum(double mean_response_len, StepStats& stats);

  RunConfig config_;
  Vocabulary vocab_;
  std::vector<Task> tasks_;
  Policy policy_;
  Rng root_;
  RolloutLimits limits_;
  FilterOptions filter_options_;
  int step_index_ = 0;
  std::unique_ptr<MetricsWriter> metrics_;
  std::vector<StepStats> history_;
  std::vector<double> len_history_;
  double prev_moving_avg_ = -1.0;
  int plateau_run_ = 0;
  bool curriculum_done_ = false;
};

}  // namespace simpletir
