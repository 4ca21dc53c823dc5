#include "simpletir/trajectory.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace simpletir {

using nlohmann::json;

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::CompleteCodeBlock: return "complete_code_block";
    case StopReason::FinalAnswer: return "final_answer";
    case StopReason::Eos: return "eos";
    case StopReason::TokenBudget: return "token_budget";
  }
  return "?";
}

StopReason stop_reason_from_string(std::string_view s) {
  if (s == "complete_code_block") return StopReason::CompleteCodeBlock;
  if (s == "final_answer") return StopReason::FinalAnswer;
  if (s == "eos") return StopReason::Eos;
  if (s == "token_budget") return StopReason::TokenBudget;
  throw std::invalid_argument("bad stop reason: " + std::string(s));
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Answer: return "answer";
    case Termination::TurnLimit: return "turn_limit";
    case Termination::TokenLimit: return "token_limit";
    case Termination::VoidStop: return "void_stop";
  }
  return "?";
}

Termination termination_from_string(std::string_view s) {
  if (s == "answer") return Termination::Answer;
  if (s == "turn_limit") return Termination::TurnLimit;
  if (s == "token_limit") return Termination::TokenLimit;
  if (s == "void_stop") return Termination::VoidStop;
  throw std::invalid_argument("bad termination: " + std::string(s));
}

std::size_t Trajectory::response_token_count() const {
  std::size_t n = 0;
  for (const auto& seg : segments) {
    if (const auto* t = std::get_if<TurnRecord>(&seg)) n += t->tokens.size();
  }
  return n;
}

int Trajectory::turn_count() const {
  int n = 0;
  for (const auto& seg : segments) {
    if (std::holds_alternative<TurnRecord>(seg)) ++n;
  }
  return n;
}

int Trajectory::void_turn_count() const {
  int n = 0;
  for (const auto& seg : segments) {
    if (const auto* t = std::get_if<TurnRecord>(&seg)) {
      if (t->kind == TurnKind::Void) ++n;
    }
  }
  return n;
}

std::vector<std::uint8_t> build_feedback_mask(const Trajectory& trajectory) {
  if (trajectory.segments.empty() ||
      !std::holds_alternative<TurnRecord>(trajectory.segments.front())) {
    throw MisalignedSegments("first segment must be a turn");
  }
  std::vector<std::uint8_t> mask;
  for (const auto& seg : trajectory.segments) {
    if (const auto* t = std::get_if<TurnRecord>(&seg)) {
      for (const auto& tok : t->tokens) {
        if (!tok.mask) throw MisalignedSegments("turn token with mask=0");
      }
      mask.insert(mask.end(), t->tokens.size(), 1);
    } else {
      const auto& f = std::get<FeedbackRecord>(seg);
      for (const auto& tok : f.tokens) {
        if (tok.mask) throw MisalignedSegments("feedback token with mask=1");
      }
      mask.insert(mask.end(), f.tokens.size(), 0);
    }
  }
  return mask;
}

void validate_trajectory(const Trajectory& trajectory, int max_turns) {
  const auto& segs = trajectory.segments;
  if (segs.empty() || !std::holds_alternative<TurnRecord>(segs.front())) {
    throw std::runtime_error("trajectory must start with a turn");
  }
  for (std::size_t i = 1; i < segs.size(); ++i) {
    if (segs[i].index() == segs[i - 1].index()) {
      throw std::runtime_error("segments must strictly alternate");
    }
  }
  int turns = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (const auto* t = std::get_if<TurnRecord>(&segs[i])) {
      ++turns;
      bool has_code = t->kind == TurnKind::Code;
      if (has_code != t->code.has_value()) {
        throw std::runtime_error("code payload inconsistent with turn kind");
      }
      if ((t->kind == TurnKind::Answer) != t->answer.has_value()) {
        throw std::runtime_error("answer payload inconsistent with turn kind");
      }
      if (t->kind == TurnKind::Answer && i + 1 != segs.size()) {
        throw std::runtime_error("answer turn must be final");
      }
      bool last = i + 1 == segs.size();
      if (has_code && !last && !std::holds_alternative<FeedbackRecord>(segs[i + 1])) {
        throw std::runtime_error("code turn must be followed by feedback");
      }
      if (!has_code && !last) {
        throw std::runtime_error("non-code turn cannot be followed by feedback");
      }
    }
  }
  if (turns > max_turns) throw std::runtime_error("turn count exceeds limit");
  build_feedback_mask(trajectory);
}

namespace {

json tokens_to_json(const std::vector<TokenRecord>& toks) {
  json arr = json::array();
  for (const auto& t : toks) {
    arr.push_back({{"id", t.id}, {"old_logprob", t.old_logprob}, {"mask", int(t.mask)}});
  }
  return arr;
}

std::vector<TokenRecord> tokens_from_json(const json& arr) {
  std::vector<TokenRecord> toks;
  for (const auto& j : arr) {
    TokenRecord t;
    t.id = j.at("id").get<int>();
    t.old_logprob = j.at("old_logprob").get<double>();
    t.mask = static_cast<std::uint8_t>(j.at("mask").get<int>());
    toks.push_back(t);
  }
  return toks;
}

}  // namespace

std::string trajectory_to_json(const Trajectory& t) {
  json segs = json::array();
  for (const auto& seg : t.segments) {
    if (const auto* turn = std::get_if<TurnRecord>(&seg)) {
      json j = {{"role", "turn"},
                {"text", turn->text},
                {"tokens", tokens_to_json(turn->tokens)},
                {"kind", std::string(to_string(turn->kind))},
                {"stop_reason", std::string(to_string(turn->stop_reason))}};
      if (turn->code) j["code"] = *turn->code;
      if (turn->answer) j["answer"] = *turn->answer;
      segs.push_back(std::move(j));
    } else {
      const auto& f = std::get<FeedbackRecord>(seg);
      segs.push_back({{"role", "feedback"},
                      {"text", f.text},
                      {"tokens", tokens_to_json(f.tokens)},
                      {"exec_status", std::string(to_string(f.exec_status))}});
    }
  }
  json j = {{"task_id", t.task_id},
            {"prompt", t.prompt},
            {"segments", std::move(segs)},
            {"reward", t.reward},
            {"terminated_by", std::string(to_string(t.terminated_by))}};
  if (t.sandbox_answer) j["sandbox_answer"] = *t.sandbox_answer;
  return j.dump();
}

Trajectory trajectory_from_json(const std::string& line) {
  json j = json::parse(line);
  Trajectory t;
  t.task_id = j.at("task_id").get<std::string>();
  t.prompt = j.at("prompt").get<std::string>();
  t.reward = j.at("reward").get<double>();
  t.terminated_by = termination_from_string(j.at("terminated_by").get<std::string>());
  if (j.contains("sandbox_answer")) t.sandbox_answer = j["sandbox_answer"].get<double>();
  for (const auto& js : j.at("segments")) {
    std::string role = js.at("role").get<std::string>();
    if (role == "turn") {
      TurnRecord turn;
      turn.text = js.at("text").get<std::string>();
      turn.tokens = tokens_from_json(js.at("tokens"));
      turn.kind = turn_kind_from_string(js.at("kind").get<std::string>());
      turn.stop_reason = stop_reason_from_string(js.at("stop_reason").get<std::string>());
      if (js.contains("code")) turn.code = js["code"].get<std::string>();
      if (js.contains("answer")) turn.answer = js["answer"].get<std::string>();
      t.segments.emplace_back(std::move(turn));
    } else if (role == "feedback") {
      FeedbackRecord f;
      f.text = js.at("text").get<std::string>();
      f.tokens = tokens_from_json(js.at("tokens"));
      f.exec_status = exec_status_from_string(js.at("exec_status").get<std::string>());
      t.segments.emplace_back(std::move(f));
    } else {
      throw std::runtime_error("bad segment role: " + role);
    }
  }
  return t;
}

void write_trajectories_jsonl(const std::string& path, const std::vector<Trajectory>& trajectories,
                              bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& t : trajectories) out << trajectory_to_json(t) << '\n';
}

std::vector<Trajectory> read_trajectories_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trajectory_from_json(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace simpletir
