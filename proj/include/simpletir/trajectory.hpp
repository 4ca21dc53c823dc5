#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "simpletir/sandbox.hpp"
#include "simpletir/text.hpp"
#include "simpletir/vocab.hpp"

namespace simpletir {

struct TokenRecord {
  int id = 0;
  double old_logprob = 0.0;  // natural log; 0.0 for feedback/prompt tokens
  std::uint8_t mask = 0;     // 1 = model-generated response token
};

enum class StopReason { CompleteCodeBlock, FinalAnswer, Eos, TokenBudget };

std::string_view to_string(StopReason r);
StopReason stop_reason_from_string(std::string_view s);

struct TurnRecord {
  std::string text;
  std::vector<TokenRecord> tokens;  // all mask=1
  TurnKind kind = TurnKind::Void;
  std::optional<std::string> code;
  std::optional<std::string> answer;
  StopReason stop_reason = StopReason::Eos;
};

struct FeedbackRecord {
  std::string text;                 // begins with the feedback prefix
  std::vector<TokenRecord> tokens;  // all mask=0
  ExecStatus exec_status = ExecStatus::Ok;
};

using Segment = std::variant<TurnRecord, FeedbackRecord>;

enum class Termination { Answer, TurnLimit, TokenLimit, VoidStop };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct Trajectory {
  std::string task_id;
  std::string prompt;
  std::vector<Segment> segments;  // starts with a TurnRecord, strictly alternating
  double reward = 0.0;
  Termination terminated_by = Termination::VoidStop;

  // Sandbox answer channel when a turn ended via final_answer() in code.
  std::optional<double> sandbox_answer;

  std::size_t response_token_count() const;
  int turn_count() const;
  int void_turn_count() const;
};

struct MisalignedSegments : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat mask aligned with the concatenated segment token sequence:
// 1 exactly on response-turn tokens.
std::vector<std::uint8_t> build_feedback_mask(const Trajectory& trajectory);

// Structural checks: alternation, mask bits, turn/feedback pairing.
// Throws std::runtime_error with a description on violation.
void validate_trajectory(const Trajectory& trajectory, int max_turns);

// JSONL persistence. Field names are part of the contract.
std::string trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const std::string& line);

void write_trajectories_jsonl(const std::string& path, const std::vector<Trajectory>& trajectories,
                              bool append = false);
std::vector<Trajectory> read_trajectories_jsonl(const std::string& path);

}  // namespace simpletir
