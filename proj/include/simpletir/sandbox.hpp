#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace simpletir {

// Numeric model: exact 64-bit integers while closed under the operation,
// IEEE double otherwise.
using Value = std::variant<std::int64_t, double>;

double as_double(const Value& v);
std::string render_value(const Value& v);

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Op { Literal, Variable, Add, Sub, Mul, Div, Mod, Pow, Neg };
  Op op;
  Value literal{};       // Op::Literal
  std::string name;      // Op::Variable
  ExprPtr lhs, rhs;      // rhs unused for Neg
};

struct Statement {
  enum class Kind { Assign, Print, FinalAnswer };
  Kind kind;
  std::string name;  // Assign target
  ExprPtr expr;
};

struct Program {
  std::vector<Statement> statements;
};

struct ParseError : std::runtime_error {
  int line, column;
  ParseError(int line, int column, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + what),
        line(line), column(column) {}
};

enum class ExecStatus { Ok, ParseError, RuntimeError, Timeout };

std::string_view to_string(ExecStatus s);
ExecStatus exec_status_from_string(std::string_view s);

struct ExecResult {
  ExecStatus status = ExecStatus::Ok;
  std::string stdout_text;            // print lines joined by newline
  std::optional<Value> final_answer;  // present only when status == Ok
  std::int64_t steps_used = 0;
  std::string message;                // error detail for non-Ok statuses
};

Program parse_program(std::string_view code);

ExecResult execute(const Program& program, std::int64_t step_limit);

// Convenience: parse + execute, mapping ParseError into the result status.
ExecResult run_code(std::string_view code, std::int64_t step_limit);

inline constexpr std::string_view kFeedbackPrefix = "Code Execution Result: ";
inline constexpr std::int64_t kDefaultStepLimit = 10000;
inline constexpr std::size_t kDefaultFeedbackCharLimit = 512;

std::string format_feedback(const ExecResult& result,
                            std::size_t feedback_char_limit = kDefaultFeedbackCharLimit);

}  // namespace simpletir
