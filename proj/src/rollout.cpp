#include "simpletir/rollout.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <thread>

#include "json.hpp"

namespace simpletir {

using nlohmann::json;

std::vector<Task> read_tasks_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j = json::parse(in);
  std::vector<Task> tasks;
  for (const auto& jt : j) {
    Task t;
    t.id = jt.at("id").get<std::string>();
    t.prompt_body = jt.at("prompt_body").get<std::string>();
    t.expected_answer = jt.at("expected_answer").get<double>();
    t.difficulty = jt.at("difficulty").get<int>();
    tasks.push_back(std::move(t));
  }
  return tasks;
}

void write_tasks_json(const std::string& path, const std::vector<Task>& tasks) {
  json j = json::array();
  for (const auto& t : tasks) {
    j.push_back({{"id", t.id},
                 {"prompt_body", t.prompt_body},
                 {"expected_answer", t.expected_answer},
                 {"difficulty", t.difficulty}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

namespace {

const std::string kPromptTemplate =
    "Solve the following problem step by step. You may write code wrapped "
    "between ``` fences; it runs in an external sandbox and its output is "
    "returned after the prefix \"Code Execution Result: \". Use print() to "
    "show intermediate results. You can call final_answer(value) inside code "
    "to submit your answer, or end your response with \\boxed{answer}.\n"
    "Question: ";

bool has_complete_code_block(std::string_view text) {
  auto open = text.find("```");
  if (open == std::string_view::npos) return false;
  return text.find("```", open + 3) != std::string_view::npos;
}

}  // namespace

const std::string& prompt_template() { return kPromptTemplate; }

std::string build_prompt(const Task& task) {
  return kPromptTemplate + task.prompt_body + "\n";
}

TurnRecord generate_turn(const Policy& policy, const Vocabulary& vocab,
                         std::vector<int>& flat_ids, double temperature,
                         int token_budget, Rng& rng) {
  if (flat_ids.empty()) throw std::invalid_argument("prefix must be nonempty");
  TurnRecord turn;
  turn.stop_reason = StopReason::TokenBudget;
  const int eos = vocab.eos_id();
  for (int t = 0; t < token_budget; ++t) {
    ContextKey ctx = policy.context(flat_ids);
    auto s = policy.sample_token(ctx, temperature, rng);
    flat_ids.push_back(s.token);
    turn.tokens.push_back(TokenRecord{s.token, s.logprob, 1});
    if (s.token == eos) {
      turn.stop_reason = StopReason::Eos;
      break;
    }
    turn.text.append(vocab.surface(s.token));
    if (has_complete_code_block(turn.text)) {
      turn.stop_reason = StopReason::CompleteCodeBlock;
      break;
    }
    if (extract_final_answer(turn.text)) {
      turn.stop_reason = StopReason::FinalAnswer;
      break;
    }
  }
  auto cls = classify_turn(turn.text);
  turn.kind = cls.kind;
  turn.code = std::move(cls.code);
  turn.answer = std::move(cls.answer);
  return turn;
}

Trajectory run_trajectory(const Policy& policy, const Vocabulary& vocab, const Task& task,
                          const RolloutLimits& limits, Rng& rng) {
  Trajectory traj;
  traj.task_id = task.id;
  traj.prompt = build_prompt(task);

  std::vector<int> flat_ids = vocab.tokenize(traj.prompt);
  int response_tokens = 0;

  for (int turn_index = 0; turn_index < limits.max_turns; ++turn_index) {
    int budget = std::min(limits.max_tokens_per_turn,
                          limits.max_response_tokens - response_tokens);
    if (budget <= 0) {
      traj.terminated_by = Termination::TokenLimit;
      break;
    }
    TurnRecord turn = generate_turn(policy, vocab, flat_ids, limits.temperature, budget, rng);
    response_tokens += static_cast<int>(turn.tokens.size());
    TurnKind kind = turn.kind;
    std::optional<std::string> code = turn.code;
    traj.segments.emplace_back(std::move(turn));

    if (kind == TurnKind::Void) {
      // No feedback is fabricated for a void turn; the trajectory stops.
      traj.terminated_by = Termination::VoidStop;
      return traj;
    }
    if (kind == TurnKind::Answer) {
      traj.terminated_by = Termination::Answer;
      return traj;
    }

    // Code turn: execute the first complete block.
    ExecResult result = run_code(*code, limits.sandbox_step_limit);
    if (result.final_answer) {
      traj.sandbox_answer = as_double(*result.final_answer);
      traj.terminated_by = Termination::Answer;
      return traj;
    }
    bool next_turn_allowed = turn_index + 1 < limits.max_turns &&
                             response_tokens < limits.max_response_tokens;
    if (!next_turn_allowed) {
      traj.terminated_by = (turn_index + 1 >= limits.max_turns) ? Termination::TurnLimit
                                                                : Termination::TokenLimit;
      return traj;
    }
    FeedbackRecord fb;
    fb.exec_status = result.status;
    fb.text = format_feedback(result, limits.feedback_char_limit) + "\n";
    std::vector<int> fb_ids = vocab.tokenize(fb.text);
    for (int id : fb_ids) {
      fb.tokens.push_back(TokenRecord{id, 0.0, 0});
      flat_ids.push_back(id);
    }
    traj.segments.emplace_back(std::move(fb));
  }
  if (traj.segments.empty()) {
    traj.terminated_by = Termination::TokenLimit;
  }
  return traj;
}

double compute_reward(const Trajectory& trajectory, const Task& task) {
  std::optional<double> answer;
  if (trajectory.sandbox_answer) {
    answer = trajectory.sandbox_answer;
  } else if (!trajectory.segments.empty()) {
    if (const auto* turn = std::get_if<TurnRecord>(&trajectory.segments.back())) {
      if (turn->answer) {
        const std::string& s = *turn->answer;
        const char* begin = s.c_str();
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end != begin) {
          // Whole-string parse, whitespace tolerated at the ends.
          while (*end == ' ' || *end == '\t' || *end == '\n') ++end;
          if (*end == '\0') answer = v;
        }
      }
    }
  }
  if (!answer) return 0.0;
  double expected = task.expected_answer;
  double tol = 1e-6 * std::max(1.0, std::abs(expected));
  return std::abs(*answer - expected) <= tol ? 1.0 : 0.0;
}

GroupBatch sample_group(const Policy& policy, const Vocabulary& vocab, const Task& task, int G,
                        const RolloutLimits& limits, const Rng& rng, int num_workers) {
  if (G < 2) throw std::invalid_argument("group size must be at least 2");
  GroupBatch batch;
  batch.task = task;
  batch.trajectories.resize(static_cast<std::size_t>(G));
  std::uint64_t task_hash = hash_bytes(task.id);

  auto roll = [&](int i) {
    Rng sub = rng.substream(task_hash, static_cast<std::uint64_t>(i));
    Trajectory t = run_trajectory(policy, vocab, task, limits, sub);
    t.reward = compute_reward(t, task);
    batch.trajectories[static_cast<std::size_t>(i)] = std::move(t);
  };

  if (num_workers > 1) {
    std::vector<std::future<void>> futs;
    futs.reserve(static_cast<std::size_t>(G));
    for (int i = 0; i < G; ++i) futs.push_back(std::async(std::launch::async, roll, i));
    for (auto& f : futs) f.get();
  } else {
    for (int i = 0; i < G; ++i) roll(i);
  }

  batch.advantages.assign(static_cast<std::size_t>(G), 0.0);
  batch.keep.assign(static_cast<std::size_t>(G), 1);
  return batch;
}

namespace {

// Renders a random expression tree with `ops` binary operators and returns
// the string; compound operands are parenthesized so precedence is explicit.
std::string random_expr(int ops, Rng& rng) {
  if (ops <= 0) return std::to_string(rng.next_below(10));
  static const char kOps[] = {'+', '-', '*'};
  char op = kOps[rng.next_below(3)];
  int left_ops = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(ops)));
  std::string lhs = random_expr(left_ops, rng);
  std::string rhs = random_expr(ops - 1 - left_ops, rng);
  if (left_ops > 0) lhs = "(" + lhs + ")";
  if (ops - 1 - left_ops > 0) rhs = "(" + rhs + ")";
  return lhs + op + rhs;
}

}  // namespace

std::vector<Task> generate_tasks(int count, int difficulty, Rng& rng) {
  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::string expr = random_expr(difficulty, rng);
    ExecResult res = run_code("final_answer(" + expr + ")", kDefaultStepLimit);
    if (res.status != ExecStatus::Ok || !res.final_answer) {
      throw std::runtime_error("task generator produced an invalid expression: " + expr);
    }
    Task t;
    t.id = "d" + std::to_string(difficulty) + "-" + std::to_string(i);
    t.prompt_body = "compute " + expr;
    t.expected_answer = as_double(*res.final_answer);
    t.difficulty = difficulty;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace simpletir
