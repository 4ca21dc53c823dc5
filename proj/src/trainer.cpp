#include "simpletir/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <unordered_map>

namespace simpletir {

namespace fs = std::filesystem;

Vocabulary vocab_from_spec(const std::string& spec) {
  if (spec == "ascii") return Vocabulary::ascii();
  return Vocabulary(spec);
}

std::vector<Task> build_train_tasks(const RunConfig& config, const Rng& root) {
  if (!config.paths.tasks_file.empty()) {
    return read_tasks_json(config.paths.tasks_file);
  }
  std::vector<Task> tasks;
  const int counts[3] = {config.tasks.depth1, config.tasks.depth2, config.tasks.depth3};
  for (int depth = 1; depth <= 3; ++depth) {
    if (counts[depth - 1] <= 0) continue;
    Rng rng = root.substream(hash_bytes("tasks"), static_cast<std::uint64_t>(depth));
    auto batch = generate_tasks(counts[depth - 1], depth, rng);
    tasks.insert(tasks.end(), batch.begin(), batch.end());
  }
  return tasks;
}

void fit_format_demos(Policy& policy, const Vocabulary& vocab, const RunConfig& config,
                      const Rng& root) {
  if (config.policy.demo_count <= 0 || config.policy.demo_weight <= 0.0) return;
  const int V = policy.vocab_size();
  const std::size_t n_orders = policy.config().context_orders.size();

  // Per order: transition counts and context totals over the demo corpus,
  // keyed by the context hash the policy itself would use.
  std::vector<std::unordered_map<std::uint64_t, std::unordered_map<int, double>>> counts(n_orders);

  for (int depth = 1; depth <= 3; ++depth) {
    Rng rng = root.substream(hash_bytes("demos"), static_cast<std::uint64_t>(depth));
    auto demo_tasks = generate_tasks(config.policy.demo_count, depth, rng);
    // Submitted digits come from a second, independent draw of expressions:
    // they follow the marginal answer distribution of the task family but
    // are uncorrelated with the demo's own question, so the scaffold teaches
    // the submission format and plausible magnitudes, never an answer.
    Rng digit_rng = root.substream(hash_bytes("demo_digits"), static_cast<std::uint64_t>(depth));
    auto digit_tasks = generate_tasks(config.policy.demo_count, depth, digit_rng);
    const auto echo_cutoff =
        static_cast<std::size_t>(config.policy.demo_echo_fraction * config.policy.demo_count);
    for (std::size_t d = 0; d < demo_tasks.size(); ++d) {
      const auto& task = demo_tasks[d];
      // Echo demos submit the question expression itself to the interpreter
      // (the tool does the arithmetic); digit demos submit a literal drawn
      // from the independent expression's answer. Echoing is only taught
      // when the whole expression stays inside the widest context window at
      // submission time; otherwise the copy source is invisible and the fit
      // would just pollute the shared short contexts.
      static const std::string kScaffold = "```\nfinal_answer(";
      const int max_order =
          *std::max_element(config.policy.context_orders.begin(), config.policy.context_orders.end());
      std::string expr = task.prompt_body.substr(std::string("compute ").size());
      const bool source_visible =
          static_cast<int>(expr.size() + kScaffold.size()) + 1 <= max_order;
      std::string submitted;
      if (d < echo_cutoff && source_visible) {
        submitted = std::move(expr);
      } else {
        submitted = std::to_string(static_cast<long long>(digit_tasks[d].expected_answer));
      }
      std::string response = "```\nfinal_answer(" + submitted + ")\n```";
      std::vector<int> ids = vocab.tokenize(build_prompt(task));
      for (int id : vocab.tokenize(response)) {
        ContextKey ctx = policy.context(ids);
        for (std::size_t k = 0; k < n_orders; ++k) {
          counts[k][ctx.order_hashes[k]][id] += 1.0;
        }
        ids.push_back(id);
      }
    }
  }

  // Additive-smoothed log-frequency fit. Only observed (context, token)
  // pairs are written, with logits expressed relative to the unseen-token
  // level; by softmax shift invariance this matches a full per-context fit
  // while keeping the table sparse (collisions stay rare). Each matched
  // order contributes at full strength; unmatched orders fall back to the
  // zero-logit baseline, which is the backoff.
  // Counts are capped before the log: contexts with heavy evidence stay
  // soft (roughly uniform over their seen continuations, which keeps
  // exploration alive), while sparse context-specific evidence still
  // separates cleanly from the unseen level.
  const double alpha = 0.5;
  const double scale = config.policy.demo_weight;
  const double cap = config.policy.demo_count_cap;
  (void)V;
  for (std::size_t k = 0; k < n_orders; ++k) {
    for (const auto& [ctx_hash, by_token] : counts[k]) {
      for (const auto& [tok, c_raw] : by_token) {
        double c = cap > 0.0 ? std::min(c_raw, cap) : c_raw;
        double logit = scale * std::log((c + alpha) / alpha);
        policy.weight_at(policy.slot_for_order(k, ctx_hash, tok)) += logit / policy.order_gain(k);
      }
    }
  }
}

Policy init_policy(const RunConfig& config, const Vocabulary& vocab, const Rng& root) {
  PolicyConfig pc;
  pc.context_orders = config.policy.context_orders;
  pc.order_gains = config.policy.order_gains;
  pc.vocab_size = vocab.size();
  pc.capacity_log2 = config.policy.capacity_log2;
  pc.temperature = config.rollout.temperature;
  Policy policy(pc);
  fit_format_demos(policy, vocab, config, root);
  if (config.policy.init_scale > 0.0) {
    Rng noise = root.substream(hash_bytes("init_noise"));
    for (double& w : policy.weights()) {
      w += config.policy.init_scale * noise.next_gaussian();
    }
  }
  return policy;
}

EvalReport eval_policy(const Policy& policy, const Vocabulary& vocab,
                       const std::vector<Task>& tasks, int samples_per_task,
                       const RolloutLimits& limits, const Rng& root) {
  EvalReport report;
  report.samples_per_task = samples_per_task;
  std::map<int, double> solved;
  double total = 0.0;
  for (const auto& task : tasks) {
    std::uint64_t task_hash = hash_bytes(task.id);
    double hits = 0.0;
    for (int i = 0; i < samples_per_task; ++i) {
      Rng rng = root.substream(task_hash, static_cast<std::uint64_t>(i));
      Trajectory t = run_trajectory(policy, vocab, task, limits, rng);
      hits += compute_reward(t, task);
    }
    solved[task.difficulty] += hits / static_cast<double>(samples_per_task);
    report.tasks_by_difficulty[task.difficulty] += 1;
    total += hits / static_cast<double>(samples_per_task);
  }
  for (const auto& [difficulty, sum] : solved) {
    report.solve_rate_by_difficulty[difficulty] =
        sum / static_cast<double>(report.tasks_by_difficulty[difficulty]);
  }
  report.overall = tasks.empty() ? 0.0 : total / static_cast<double>(tasks.size());
  return report;
}

namespace {

double percentile(std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 1.0;
  auto idx = static_cast<std::size_t>(p * static_cast<double>(sorted.size() - 1));
  return sorted[idx];
}

}  // namespace

AnalyzeReport analyze_trajectories(const std::vector<Trajectory>& trajectories) {
  AnalyzeReport report;
  report.n_trajectories = trajectories.size();
  if (trajectories.empty()) return report;
  std::size_t n_void = 0;
  std::vector<double> probs;
  std::vector<double> turn_min_sum;
  std::vector<std::size_t> turn_min_n;
  for (const auto& t : trajectories) {
    if (t.void_turn_count() > 0) ++n_void;
    report.turn_histogram[t.turn_count()] += 1;
    std::size_t turn_index = 0;
    for (const auto& seg : t.segments) {
      const auto* turn = std::get_if<TurnRecord>(&seg);
      if (!turn) continue;
      double min_lp = 0.0;
      bool any = false;
      for (const auto& tok : turn->tokens) {
        probs.push_back(std::exp(tok.old_logprob));
        min_lp = any ? std::min(min_lp, tok.old_logprob) : tok.old_logprob;
        any = true;
      }
      if (any) {
        if (turn_min_sum.size() <= turn_index) {
          turn_min_sum.resize(turn_index + 1, 0.0);
          turn_min_n.resize(turn_index + 1, 0);
        }
        turn_min_sum[turn_index] += std::exp(min_lp);
        turn_min_n[turn_index] += 1;
      }
      ++turn_index;
    }
  }
  report.void_rate = static_cast<double>(n_void) / static_cast<double>(trajectories.size());
  std::sort(probs.begin(), probs.end());
  report.p0_token_prob = percentile(probs, 0.0);
  report.p1_token_prob = percentile(probs, 0.01);
  report.p5_token_prob = percentile(probs, 0.05);
  report.p50_token_prob = percentile(probs, 0.50);
  report.per_turn_min_prob.resize(turn_min_sum.size());
  for (std::size_t k = 0; k < turn_min_sum.size(); ++k) {
    report.per_turn_min_prob[k] = turn_min_sum[k] / static_cast<double>(turn_min_n[k]);
  }
  return report;
}

Trainer::Trainer(RunConfig config)
    : config_(std::move(config)),
      vocab_(vocab_from_spec(config_.policy.alphabet)),
      tasks_(build_train_tasks(config_, Rng(config_.run.seed))),
      policy_(init_policy(config_, vocab_, Rng(config_.run.seed))),
      root_(config_.run.seed) {
  config_.validate();
  if (tasks_.empty()) throw ConfigError("no training tasks");
  limits_.max_turns = config_.rollout.max_turns;
  limits_.max_tokens_per_turn = config_.rollout.max_tokens_per_turn;
  limits_.max_response_tokens = config_.rollout.max_response_tokens;
  limits_.temperature = config_.rollout.temperature;
  limits_.sandbox_step_limit = config_.rollout.sandbox_step_limit;
  limits_.feedback_char_limit = static_cast<std::size_t>(config_.rollout.feedback_char_limit);
  filter_options_.low_prob_quantile = config_.filters.low_prob_quantile;
  filter_options_.high_ratio_threshold = config_.filters.high_ratio_threshold;
  fs::create_directories(config_.paths.out_dir);
  fs::create_directories(checkpoint_path(""));
  metrics_ = std::make_unique<MetricsWriter>(metrics_path());
}

std::string Trainer::metrics_path() const {
  return (fs::path(config_.paths.out_dir) / config_.paths.metrics).string();
}

std::string Trainer::checkpoint_path(const std::string& name) const {
  return (fs::path(config_.paths.out_dir) / config_.paths.checkpoints / name).string();
}

void Trainer::maybe_advance_curriculum(double mean_response_len, StepStats& stats) {
  if (!config_.curriculum.enabled || curriculum_done_) return;
  len_history_.push_back(mean_response_len);
  const int w = config_.curriculum.window;
  if (static_cast<int>(len_history_.size()) < w) return;
  double ma = std::accumulate(len_history_.end() - w, len_history_.end(), 0.0) /
              static_cast<double>(w);
  if (prev_moving_avg_ > 0.0 &&
      std::abs(ma - prev_moving_avg_) / prev_moving_avg_ < config_.curriculum.tolerance) {
    ++plateau_run_;
  } else {
    plateau_run_ = 0;
  }
  prev_moving_avg_ = ma;
  if (plateau_run_ >= config_.curriculum.patience) {
    limits_.max_turns = config_.curriculum.new_max_turns;
    limits_.max_response_tokens = config_.curriculum.new_max_response_tokens;
    curriculum_done_ = true;
    stats.curriculum_fired = true;
  }
}

StepStats Trainer::step() {
  const int step = step_index_++;
  StepStats stats;
  stats.step = step;

  // Task minibatch: partial Fisher-Yates draw without replacement.
  Rng pick_rng = root_.substream(hash_bytes("pick"), static_cast<std::uint64_t>(step));
  std::vector<std::size_t> order(tasks_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t n_pick = std::min<std::size_t>(static_cast<std::size_t>(config_.run.tasks_per_step),
                                             tasks_.size());
  for (std::size_t i = 0; i < n_pick; ++i) {
    std::size_t j = i + pick_rng.next_below(order.size() - i);
    std::swap(order[i], order[j]);
  }

  Rng rollout_rng = root_.substream(hash_bytes("rollout"), static_cast<std::uint64_t>(step));
  std::vector<GroupBatch> groups;
  groups.reserve(n_pick);
  for (std::size_t i = 0; i < n_pick; ++i) {
    groups.push_back(sample_group(policy_, vocab_, tasks_[order[i]], config_.run.group_size,
                                  limits_, rollout_rng, config_.run.num_workers));
  }

  // Rollout statistics over everything sampled this step.
  std::size_t n_traj = 0, n_void = 0;
  double sum_reward = 0.0, sum_len = 0.0, sum_turns = 0.0;
  std::vector<double> logprobs;
  for (const auto& g : groups) {
    for (const auto& t : g.trajectories) {
      ++n_traj;
      sum_reward += t.reward;
      sum_len += static_cast<double>(t.response_token_count());
      sum_turns += static_cast<double>(t.turn_count());
      if (t.void_turn_count() > 0) ++n_void;
      for (const auto& seg : t.segments) {
        if (const auto* turn = std::get_if<TurnRecord>(&seg)) {
          for (const auto& tok : turn->tokens) logprobs.push_back(tok.old_logprob);
        }
      }
    }
  }
  stats.mean_reward = sum_reward / static_cast<double>(n_traj);
  stats.mean_response_len = sum_len / static_cast<double>(n_traj);
  stats.mean_turns = sum_turns / static_cast<double>(n_traj);
  stats.void_rate = static_cast<double>(n_void) / static_cast<double>(n_traj);
  std::sort(logprobs.begin(), logprobs.end());
  stats.min_token_prob = logprobs.empty() ? 1.0 : std::exp(logprobs.front());
  stats.p01_token_prob =
      logprobs.empty()
          ? 1.0
          : std::exp(logprobs[static_cast<std::size_t>(0.01 *
                                                       static_cast<double>(logprobs.size() - 1))]);

  if (!config_.paths.trajectories.empty()) {
    std::vector<Trajectory> all;
    for (const auto& g : groups) {
      all.insert(all.end(), g.trajectories.begin(), g.trajectories.end());
    }
    write_trajectories_jsonl(
        (fs::path(config_.paths.out_dir) / config_.paths.trajectories).string(), all,
        /*append=*/step > 0);
  }

  // Advantages over the full group (default), optional DAPO-style dropping
  // of zero-variance groups.
  std::vector<GroupBatch> update_groups;
  for (auto& g : groups) {
    std::vector<double> rewards;
    rewards.reserve(g.trajectories.size());
    for (const auto& t : g.trajectories) rewards.push_back(t.reward);
    bool degenerate =
        std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
    if (degenerate && config_.optim.drop_degenerate_groups) continue;
    g.advantages = compute_advantages(rewards, config_.optim.adv_norm_epsilon);
    update_groups.push_back(std::move(g));
  }

  auto finish = [&]() {
    metrics_->write({stats.step, stats.mean_reward, stats.mean_response_len, stats.mean_turns,
                     stats.void_rate, stats.filtered_fraction, stats.report.grad_norm_preclip,
                     stats.report.grad_norm_postclip, stats.min_token_prob, stats.p01_token_prob,
                     stats.report.objective_value, stats.report.clipped_token_fraction});
    if ((step + 1) % config_.run.checkpoint_interval == 0) {
      policy_.save_checkpoint(checkpoint_path("step_" + std::to_string(step + 1) + ".json"));
    }
    maybe_advance_curriculum(stats.mean_response_len, stats);
    history_.push_back(stats);
  };

  if (update_groups.empty()) {
    stats.skipped = true;
    stats.filtered_fraction = 1.0;
    finish();
    return history_.back();
  }

  UpdateBatch batch = build_update_batch(update_groups, vocab_);
  FilterDecision decision = apply_filter_strategy(config_.run.filter, batch, policy_,
                                                  limits_.temperature, filter_options_);
  apply_decision(batch, decision);
  stats.filtered_fraction =
      1.0 - static_cast<double>(batch.kept_count()) / static_cast<double>(n_traj);

  if (config_.optim.advantages_after_filter) {
    // Group statistics restricted to surviving members; groups are
    // contiguous blocks of G in batch order.
    const std::size_t G = static_cast<std::size_t>(config_.run.group_size);
    for (std::size_t base = 0; base < batch.trajectories.size(); base += G) {
      std::vector<double> rewards;
      std::vector<std::size_t> members;
      for (std::size_t i = base; i < base + G && i < batch.trajectories.size(); ++i) {
        if (!batch.trajectories[i].keep) continue;
        rewards.push_back(batch.trajectories[i].reward);
        members.push_back(i);
      }
      if (rewards.size() < 2) {
        for (std::size_t i : members) batch.trajectories[i].advantage = 0.0;
        continue;
      }
      auto adv = compute_advantages(rewards, config_.optim.adv_norm_epsilon);
      for (std::size_t k = 0; k < members.size(); ++k) {
        batch.trajectories[members[k]].advantage = adv[k];
      }
    }
  }

  for (const auto& t : batch.trajectories) {
    if (t.keep && t.void_turns > 0) ++stats.void_in_update;
  }

  ClipConfig clip;
  clip.eps_low = config_.optim.eps_low;
  clip.eps_high = config_.optim.eps_high;
  clip.learning_rate = config_.optim.learning_rate;
  clip.grad_clip_norm = config_.optim.grad_clip_norm;
  clip.ppo_epochs = config_.optim.ppo_epochs;
  clip.adv_norm_epsilon = config_.optim.adv_norm_epsilon;

  try {
    GradBuffer grad(policy_.capacity());
    for (int epoch = 0; epoch < clip.ppo_epochs; ++epoch) {
      UpdateReport r = batch_gradient(batch, policy_, limits_.temperature, clip, grad);
      apply_update(policy_, grad, clip, r);
      if (epoch == 0) {
        stats.report = r;
      } else {
        // Norm columns track the per-step worst case across epochs.
        stats.report.grad_norm_preclip = std::max(stats.report.grad_norm_preclip,
                                                  r.grad_norm_preclip);
        stats.report.grad_norm_postclip = std::max(stats.report.grad_norm_postclip,
                                                   r.grad_norm_postclip);
        stats.report.ratio_clamp_count += r.ratio_clamp_count;
      }
    }
  } catch (const DegenerateBatch&) {
    stats.skipped = true;
  }

  finish();
  return history_.back();
}

int Trainer::run(const ProgressFn& progress) {
  int done = 0;
  for (int i = step_index_; i < config_.run.total_steps; ++i) {
    StepStats s = step();
    ++done;
    if (progress && !progress(s)) break;
  }
  policy_.save_checkpoint(checkpoint_path("final.json"));
  return done;
}

EvalReport Trainer::evaluate() const {
  return eval_policy(policy_, vocab_, tasks_, config_.eval.samples_per_task, limits_,
                     root_.substream(hash_bytes("eval")));
}

}  // namespace simpletir
