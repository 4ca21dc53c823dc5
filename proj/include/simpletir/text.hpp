#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace simpletir {

enum class TurnKind { Code, Answer, Void };

std::string_view to_string(TurnKind k);
TurnKind turn_kind_from_string(std::string_view s);

// Contents of every complete fenced block (``` ... ```), in order, fence
// markers stripped. An optional language tag on the opening fence line is
// dropped. An unclosed fence yields no block.
std::vector<std::string> extract_code_blocks(std::string_view text);

// Innermost content of the last \boxed{...} occurrence with balanced braces.
std::optional<std::string> extract_final_answer(std::string_view text);

struct TurnClassification {
  TurnKind kind;
  std::optional<std::string> code;    // first complete block, when kind == Code
  std::optional<std::string> answer;  // boxed content, when kind == Answer
};

TurnClassification classify_turn(std::string_view text);

}  // namespace simpletir
