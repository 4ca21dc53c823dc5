#include "simpletir/text.hpp"

#include <cctype>
#include <stdexcept>

namespace simpletir {

std::string_view to_string(TurnKind k) {
  switch (k) {
    case TurnKind::Code: return "code";
    case TurnKind::Answer: return "answer";
    case TurnKind::Void: return "void";
  }
  return "?";
}

TurnKind turn_kind_from_string(std::string_view s) {
  if (s == "code") return TurnKind::Code;
  if (s == "answer") return TurnKind::Answer;
  if (s == "void") return TurnKind::Void;
  throw std::invalid_argument("bad turn kind: " + std::string(s));
}

namespace {

constexpr std::string_view kFence = "```";

bool is_tag_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '+' || c == '-';
}

// Strips an optional language tag line from the start of a fenced segment.
std::string strip_tag(std::string_view segment) {
  auto nl = segment.find('\n');
  if (nl == std::string_view::npos) return std::string(segment);
  std::string_view first_line = segment.substr(0, nl);
  for (char c : first_line) {
    if (!is_tag_char(c)) return std::string(segment);
  }
  return std::string(segment.substr(nl + 1));
}

}  // namespace

std::vector<std::string> extract_code_blocks(std::string_view text) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find(kFence, pos);
    if (open == std::string_view::npos) break;
    auto close = text.find(kFence, open + kFence.size());
    if (close == std::string_view::npos) break;  // unclosed fence: no block
    blocks.push_back(strip_tag(text.substr(open + kFence.size(), close - open - kFence.size())));
    pos = close + kFence.size();
  }
  return blocks;
}

std::optional<std::string> extract_final_answer(std::string_view text) {
  constexpr std::string_view kBoxed = "\\boxed{";
  auto start = text.rfind(kBoxed);
  while (start != std::string_view::npos) {
    std::size_t i = start + kBoxed.size();
    int depth = 1;
    for (; i < text.size(); ++i) {
      if (text[i] == '{') {
        ++depth;
      } else if (text[i] == '}') {
        if (--depth == 0) {
          return std::string(text.substr(start + kBoxed.size(), i - start - kBoxed.size()));
        }
      }
    }
    // Unbalanced: try an earlier occurrence.
    if (start == 0) break;
    start = text.rfind(kBoxed, start - 1);
  }
  return std::nullopt;
}

TurnClassification classify_turn(std::string_view text) {
  auto blocks = extract_code_blocks(text);
  if (!blocks.empty()) {
    return {TurnKind::Code, blocks.front(), std::nullopt};
  }
  if (auto ans = extract_final_answer(text)) {
    return {TurnKind::Answer, std::nullopt, std::move(ans)};
  }
  return {TurnKind::Void, std::nullopt, std::nullopt};
}

}  // namespace simpletir
