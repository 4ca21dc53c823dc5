#include "simpletir.h"

#include <cstring>
#include <string>

#include "json.hpp"
#include "simpletir/config.hpp"
#include "simpletir/diagnostics.hpp"
#include "simpletir/sandbox.hpp"
#include "simpletir/trainer.hpp"

using namespace simpletir;
using nlohmann::json;

struct simpletir_config {
  RunConfig value;
};

namespace {

thread_local std::string g_last_error = "ok";

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Maps exceptions from `fn` onto status codes and the last-error slot.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error = "ok";
    return SIMPLETIR_OK;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return SIMPLETIR_ERR_CONFIG;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return SIMPLETIR_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SIMPLETIR_ERR_RUNTIME;
  }
}

int usage_error(const char* msg) {
  g_last_error = msg;
  return SIMPLETIR_ERR_USAGE;
}

json eval_report_json(const EvalReport& r) {
  json by_difficulty = json::object();
  for (const auto& [d, rate] : r.solve_rate_by_difficulty) {
    by_difficulty[std::to_string(d)] = rate;
  }
  return {{"samples_per_task", r.samples_per_task},
          {"overall", r.overall},
          {"solve_rate_by_difficulty", by_difficulty}};
}

}  // namespace

extern "C" {

const char* simpletir_last_error(void) { return g_last_error.c_str(); }

void simpletir_string_free(char* s) { std::free(s); }

int simpletir_config_default(simpletir_config** out) {
  if (!out) return usage_error("out must not be NULL");
  return guarded([&] { *out = new simpletir_config{default_config()}; });
}

int simpletir_config_load(const char* path, simpletir_config** out) {
  if (!path || !out) return usage_error("path and out must not be NULL");
  return guarded([&] { *out = new simpletir_config{load_config(path)}; });
}

int simpletir_config_set(simpletir_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return usage_error("config, key, value must not be NULL");
  return guarded([&] { set_config_value(config->value, key, value); });
}

int simpletir_config_dump(const simpletir_config* config, char** text_out) {
  if (!config || !text_out) return usage_error("config and text_out must not be NULL");
  return guarded([&] { *text_out = dup_string(dump_config(config->value)); });
}

void simpletir_config_free(simpletir_config* config) { delete config; }

int simpletir_train(const simpletir_config* config, simpletir_progress_fn progress, void* user,
                    int* steps_done_out) {
  if (!config) return usage_error("config must not be NULL");
  return guarded([&] {
    RunConfig rc = config->value;
    rc.validate();
    Trainer trainer(rc);
    Trainer::ProgressFn cb;
    if (progress) {
      cb = [progress, user](const StepStats& s) {
        return progress(s.step, s.mean_reward, s.report.grad_norm_preclip, user) != 0;
      };
    }
    int done = trainer.run(cb);
    if (steps_done_out) *steps_done_out = done;
  });
}

int simpletir_eval(const simpletir_config* config, const char* checkpoint_path,
                   char** report_json_out) {
  if (!config || !checkpoint_path || !report_json_out) {
    return usage_error("config, checkpoint_path, report_json_out must not be NULL");
  }
  return guarded([&] {
    RunConfig rc = config->value;
    rc.validate();
    Vocabulary vocab = vocab_from_spec(rc.policy.alphabet);
    std::vector<Task> tasks = build_train_tasks(rc, Rng(rc.run.seed));
    Policy policy = Policy::load_checkpoint(checkpoint_path);
    RolloutLimits limits;
    limits.max_turns = rc.rollout.max_turns;
    limits.max_tokens_per_turn = rc.rollout.max_tokens_per_turn;
    limits.max_response_tokens = rc.rollout.max_response_tokens;
    limits.temperature = rc.rollout.temperature;
    limits.sandbox_step_limit = rc.rollout.sandbox_step_limit;
    limits.feedback_char_limit = static_cast<std::size_t>(rc.rollout.feedback_char_limit);
    EvalReport report = eval_policy(policy, vocab, tasks, rc.eval.samples_per_task, limits,
                                    Rng(rc.run.seed).substream(hash_bytes("eval")));
    *report_json_out = dup_string(eval_report_json(report).dump());
  });
}

int simpletir_analyze(const char* trajectories_jsonl_path, char** report_json_out) {
  if (!trajectories_jsonl_path || !report_json_out) {
    return usage_error("path and report_json_out must not be NULL");
  }
  return guarded([&] {
    std::vector<Trajectory> trajectories = read_trajectories_jsonl(trajectories_jsonl_path);
    AnalyzeReport r = analyze_trajectories(trajectories);
    json hist = json::object();
    for (const auto& [turns, n] : r.turn_histogram) hist[std::to_string(turns)] = n;
    json j = {{"n_trajectories", r.n_trajectories},
              {"void_rate", r.void_rate},
              {"turn_histogram", hist},
              {"p0_token_prob", r.p0_token_prob},
              {"p1_token_prob", r.p1_token_prob},
              {"p5_token_prob", r.p5_token_prob},
              {"p50_token_prob", r.p50_token_prob},
              {"per_turn_min_prob", r.per_turn_min_prob}};
    *report_json_out = dup_string(j.dump());
  });
}

int simpletir_exec_code(const char* code, long long step_limit, char** feedback_out,
                        char** final_answer_out) {
  if (!code || !feedback_out) return usage_error("code and feedback_out must not be NULL");
  if (step_limit <= 0) return usage_error("step_limit must be positive");
  return guarded([&] {
    ExecResult result = run_code(code, step_limit);
    *feedback_out = dup_string(format_feedback(result, kDefaultFeedbackCharLimit));
    if (final_answer_out) {
      *final_answer_out =
          result.final_answer ? dup_string(render_value(*result.final_answer)) : nullptr;
    }
  });
}

int simpletir_verify_prop1(const simpletir_config* config, unsigned long long seed,
                           char** report_json_out) {
  if (!config || !report_json_out) {
    return usage_error("config and report_json_out must not be NULL");
  }
  return guarded([&] {
    RunConfig rc = config->value;
    rc.run.seed = seed;
    rc.validate();
    Vocabulary vocab = vocab_from_spec(rc.policy.alphabet);
    Rng root(rc.run.seed);
    std::vector<Task> tasks = build_train_tasks(rc, root);
    Policy policy = init_policy(rc, vocab, root);
    RolloutLimits limits;
    limits.max_turns = rc.rollout.max_turns;
    limits.max_tokens_per_turn = rc.rollout.max_tokens_per_turn;
    limits.max_response_tokens = rc.rollout.max_response_tokens;
    limits.temperature = rc.rollout.temperature;
    limits.sandbox_step_limit = rc.rollout.sandbox_step_limit;
    limits.feedback_char_limit = static_cast<std::size_t>(rc.rollout.feedback_char_limit);

    Rng rollout_rng = root.substream(hash_bytes("verify"));
    std::vector<GroupBatch> groups;
    std::size_t n_tasks = std::min<std::size_t>(tasks.size(),
                                                static_cast<std::size_t>(rc.run.tasks_per_step));
    for (std::size_t i = 0; i < n_tasks; ++i) {
      GroupBatch g = sample_group(policy, vocab, tasks[i], rc.run.group_size, limits, rollout_rng,
                                  rc.run.num_workers);
      std::vector<double> rewards;
      for (const auto& t : g.trajectories) rewards.push_back(t.reward);
      g.advantages = compute_advantages(rewards, rc.optim.adv_norm_epsilon);
      groups.push_back(std::move(g));
    }
    UpdateBatch batch = build_update_batch(groups, vocab);

    // A fresh batch is often degenerate (zero advantages, ratios all 1),
    // which would make the check vacuous; synthesize advantages for
    // zero-variance groups and nudge the policy off the rollout snapshot.
    Rng synth = root.substream(hash_bytes("prop1_synth"));
    for (auto& t : batch.trajectories) {
      if (t.advantage == 0.0) t.advantage = synth.next_gaussian();
    }
    for (const auto& t : batch.trajectories) {
      std::vector<std::size_t> slots;
      for (const auto& tok : t.response) {
        ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), tok.pos));
        policy.slots_for(ctx, t.ids[tok.pos], slots);
        for (std::size_t s : slots) {
          policy.weight_at(s) += 0.02 * synth.next_gaussian();
        }
      }
    }

    ClipConfig clip;
    clip.eps_low = rc.optim.eps_low;
    clip.eps_high = rc.optim.eps_high;
    Rng fd_rng = root.substream(hash_bytes("prop1_fd"));
    Prop1Report report = verify_prop1(policy, batch, limits.temperature, clip, 1e-8, 1e-5, 100,
                                      fd_rng);
    json j = {{"tokens_checked", report.tokens_checked},
              {"max_analytic_error", report.max_analytic_error},
              {"fd_tokens_checked", report.fd_tokens_checked},
              {"max_fd_error", report.max_fd_error}};
    *report_json_out = dup_string(j.dump());
  });
}

}  // extern "C"
