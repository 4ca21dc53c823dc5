#include "simpletir/sandbox.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace simpletir {

double as_double(const Value& v) {
  if (std::holds_alternative<std::int64_t>(v)) {
    return static_cast<double>(std::get<std::int64_t>(v));
  }
  return std::get<double>(v);
}

std::string render_value(const Value& v) {
  if (std::holds_alternative<std::int64_t>(v)) {
    return std::to_string(std::get<std::int64_t>(v));
  }
  double d = std::get<double>(v);
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, ptr);
  // Integral doubles keep a trailing ".0" so the type is visible in output.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::string_view to_string(ExecStatus s) {
  switch (s) {
    case ExecStatus::Ok: return "ok";
    case ExecStatus::ParseError: return "parse_error";
    case ExecStatus::RuntimeError: return "runtime_error";
    case ExecStatus::Timeout: return "timeout";
  }
  return "?";
}

ExecStatus exec_status_from_string(std::string_view s) {
  if (s == "ok") return ExecStatus::Ok;
  if (s == "parse_error") return ExecStatus::ParseError;
  if (s == "runtime_error") return ExecStatus::RuntimeError;
  if (s == "timeout") return ExecStatus::Timeout;
  throw std::invalid_argument("bad exec status: " + std::string(s));
}

namespace {

// ---------------------------------------------------------------- scanner

struct Tok {
  enum class Kind { Number, Ident, Plus, Minus, Star, StarStar, Slash, Percent,
                    LParen, RParen, Assign, Newline, End };
  Kind kind;
  Value number{};
  std::string ident;
  int line, column;
};

class Scanner {
 public:
  explicit Scanner(std::string_view src) : src_(src) { advance(); }

  const Tok& peek() const { return tok_; }
  Tok take() {
    Tok t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\r')) {
      ++pos_;
      ++col_;
    }
    tok_.line = line_;
    tok_.column = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::Kind::End;
      return;
    }
    char c = src_[pos_];
    if (c == '\n') {
      consume(Tok::Kind::Newline, 1);
      ++line_;
      col_ = 1;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      scan_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
        ++col_;
      }
      tok_.kind = Tok::Kind::Ident;
      tok_.ident.assign(src_.substr(start, pos_ - start));
      return;
    }
    switch (c) {
      case '+': consume(Tok::Kind::Plus, 1); return;
      case '-': consume(Tok::Kind::Minus, 1); return;
      case '*':
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
          consume(Tok::Kind::StarStar, 2);
        } else {
          consume(Tok::Kind::Star, 1);
        }
        return;
      case '/': consume(Tok::Kind::Slash, 1); return;
      case '%': consume(Tok::Kind::Percent, 1); return;
      case '(': consume(Tok::Kind::LParen, 1); return;
      case ')': consume(Tok::Kind::RParen, 1); return;
      case '=': consume(Tok::Kind::Assign, 1); return;
      default:
        throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
    }
  }

  void consume(Tok::Kind k, int width) {
    tok_.kind = k;
    pos_ += static_cast<std::size_t>(width);
    col_ += width;
  }

  void scan_number() {
    std::size_t start = pos_;
    bool is_float = false;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_float = true;
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    std::string_view lit = src_.substr(start, pos_ - start);
    col_ += static_cast<int>(lit.size());
    tok_.kind = Tok::Kind::Number;
    if (is_float) {
      double d{};
      auto [p, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), d);
      if (ec != std::errc()) throw ParseError(tok_.line, tok_.column, "bad number literal");
      tok_.number = d;
    } else {
      std::int64_t n{};
      auto [p, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), n);
      if (ec != std::errc()) {
        // Integer literal too large for int64: fall back to double.
        double d{};
        std::from_chars(lit.data(), lit.data() + lit.size(), d);
        tok_.number = d;
      } else {
        tok_.number = n;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Tok tok_;
};

// ----------------------------------------------------------------- parser

class Parser {
 public:
  explicit Parser(std::string_view src) : scan_(src) {}

  Program parse() {
    Program prog;
    skip_newlines();
    while (scan_.peek().kind != Tok::Kind::End) {
      prog.statements.push_back(statement());
      if (scan_.peek().kind == Tok::Kind::Newline) {
        skip_newlines();
      } else if (scan_.peek().kind != Tok::Kind::End) {
        fail("expected end of line");
      }
    }
    return prog;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    const Tok& t = scan_.peek();
    throw ParseError(t.line, t.column,
                     t.kind == Tok::Kind::End ? msg + " at end of input" : msg);
  }

  void skip_newlines() {
    while (scan_.peek().kind == Tok::Kind::Newline) scan_.take();
  }

  void expect(Tok::Kind k, const char* what) {
    if (scan_.peek().kind != k) fail(std::string("expected ") + what);
    scan_.take();
  }

  Statement statement() {
    if (scan_.peek().kind != Tok::Kind::Ident) fail("expected statement");
    Tok head = scan_.take();
    Statement st;
    if (head.ident == "print" && scan_.peek().kind == Tok::Kind::LParen) {
      st.kind = Statement::Kind::Print;
      scan_.take();
      st.expr = expr();
      expect(Tok::Kind::RParen, "')'");
      return st;
    }
    if (head.ident == "final_answer" && scan_.peek().kind == Tok::Kind::LParen) {
      st.kind = Statement::Kind::FinalAnswer;
      scan_.take();
      st.expr = expr();
      expect(Tok::Kind::RParen, "')'");
      return st;
    }
    if (scan_.peek().kind == Tok::Kind::Assign) {
      scan_.take();
      st.kind = Statement::Kind::Assign;
      st.name = head.ident;
      st.expr = expr();
      assigned_.insert(st.name);
      return st;
    }
    fail("expected '=' or call");
  }

  ExprPtr expr() { return additive(); }

  ExprPtr additive() {
    ExprPtr lhs = term();
    while (true) {
      auto k = scan_.peek().kind;
      if (k != Tok::Kind::Plus && k != Tok::Kind::Minus) return lhs;
      scan_.take();
      lhs = binary(k == Tok::Kind::Plus ? Expr::Op::Add : Expr::Op::Sub,
                   std::move(lhs), term());
    }
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    while (true) {
      auto k = scan_.peek().kind;
      Expr::Op op;
      if (k == Tok::Kind::Star) op = Expr::Op::Mul;
      else if (k == Tok::Kind::Slash) op = Expr::Op::Div;
      else if (k == Tok::Kind::Percent) op = Expr::Op::Mod;
      else return lhs;
      scan_.take();
      lhs = binary(op, std::move(lhs), unary());
    }
  }

  // Unary minus binds looser than '**' on its left (-2**2 == -(2**2)).
  ExprPtr unary() {
    if (scan_.peek().kind == Tok::Kind::Minus) {
      scan_.take();
      auto e = std::make_unique<Expr>();
      e->op = Expr::Op::Neg;
      e->lhs = unary();
      return e;
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (scan_.peek().kind == Tok::Kind::StarStar) {
      scan_.take();
      return binary(Expr::Op::Pow, std::move(base), unary());  // right-assoc
    }
    return base;
  }

  ExprPtr primary() {
    const Tok& t = scan_.peek();
    if (t.kind == Tok::Kind::Number) {
      auto e = std::make_unique<Expr>();
      e->op = Expr::Op::Literal;
      e->literal = scan_.take().number;
      return e;
    }
    if (t.kind == Tok::Kind::Ident) {
      if (!assigned_.count(t.ident)) fail("undefined variable '" + t.ident + "'");
      auto e = std::make_unique<Expr>();
      e->op = Expr::Op::Variable;
      e->name = scan_.take().ident;
      return e;
    }
    if (t.kind == Tok::Kind::LParen) {
      scan_.take();
      ExprPtr e = expr();
      expect(Tok::Kind::RParen, "')'");
      return e;
    }
    fail("expected expression");
  }

  ExprPtr binary(Expr::Op op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_unique<Expr>();
    e->op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
  }

  Scanner scan_;
  std::set<std::string> assigned_;
};

// -------------------------------------------------------------- evaluator

struct RuntimeFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StepLimitExceeded : std::runtime_error {
  StepLimitExceeded() : std::runtime_error("execution timed out") {}
};

// Python-style modulo: result has the sign of the divisor.
std::int64_t py_mod(std::int64_t a, std::int64_t b) {
  std::int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

class Evaluator {
 public:
  Evaluator(std::int64_t step_limit) : limit_(step_limit) {}

  Value eval(const Expr& e) {
    if (++steps_ > limit_) throw StepLimitExceeded();
    switch (e.op) {
      case Expr::Op::Literal: return e.literal;
      case Expr::Op::Variable: {
        auto it = vars_.find(e.name);
        if (it == vars_.end()) throw RuntimeFault("undefined variable '" + e.name + "'");
        return it->second;
      }
      case Expr::Op::Neg: {
        Value v = eval(*e.lhs);
        if (std::holds_alternative<std::int64_t>(v)) {
          std::int64_t n = std::get<std::int64_t>(v);
          if (n == std::numeric_limits<std::int64_t>::min()) return -static_cast<double>(n);
          return -n;
        }
        return -std::get<double>(v);
      }
      default: break;
    }
    Value a = eval(*e.lhs);
    Value b = eval(*e.rhs);
    bool ints = std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b);
    switch (e.op) {
      case Expr::Op::Add:
        if (ints) {
          std::int64_t r;
          if (!__builtin_add_overflow(std::get<std::int64_t>(a), std::get<std::int64_t>(b), &r)) return r;
        }
        return as_double(a) + as_double(b);
      case Expr::Op::Sub:
        if (ints) {
          std::int64_t r;
          if (!__builtin_sub_overflow(std::get<std::int64_t>(a), std::get<std::int64_t>(b), &r)) return r;
        }
        return as_double(a) - as_double(b);
      case Expr::Op::Mul:
        if (ints) {
          std::int64_t r;
          if (!__builtin_mul_overflow(std::get<std::int64_t>(a), std::get<std::int64_t>(b), &r)) return r;
        }
        return as_double(a) * as_double(b);
      case Expr::Op::Div: {
        double denom = as_double(b);
        if (denom == 0.0) throw RuntimeFault("division by zero");
        return as_double(a) / denom;  // true division
      }
      case Expr::Op::Mod: {
        if (ints) {
          std::int64_t bb = std::get<std::int64_t>(b);
          if (bb == 0) throw RuntimeFault("modulo by zero");
          return py_mod(std::get<std::int64_t>(a), bb);
        }
        double denom = as_double(b);
        if (denom == 0.0) throw RuntimeFault("modulo by zero");
        double r = std::fmod(as_double(a), denom);
        if (r != 0.0 && ((r < 0) != (denom < 0))) r += denom;
        return r;
      }
      case Expr::Op::Pow: return pow_value(a, b);
      default: throw RuntimeFault("bad expression");
    }
  }

  std::unordered_map<std::string, Value>& vars() { return vars_; }
  std::int64_t steps() const { return steps_; }

 private:
  Value pow_value(const Value& a, const Value& b) {
    if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
      std::int64_t exp = std::get<std::int64_t>(b);
      if (exp >= 0) {
        std::int64_t base = std::get<std::int64_t>(a);
        std::int64_t result = 1;
        bool overflow = false;
        for (std::int64_t i = 0; i < exp; ++i) {
          if (++steps_ > limit_) throw StepLimitExceeded();
          if (__builtin_mul_overflow(result, base, &result)) {
            overflow = true;
            break;
          }
        }
        if (!overflow) return result;
      }
      // Negative or overflowing integer exponent falls through to double.
    }
    return std::pow(as_double(a), as_double(b));
  }

  std::unordered_map<std::string, Value> vars_;
  std::int64_t steps_ = 0;
  std::int64_t limit_;
};

}  // namespace

Program parse_program(std::string_view code) {
  return Parser(code).parse();
}

ExecResult execute(const Program& program, std::int64_t step_limit) {
  ExecResult res;
  Evaluator ev(step_limit);
  std::vector<std::string> lines;
  try {
    for (const auto& st : program.statements) {
      Value v = ev.eval(*st.expr);
      switch (st.kind) {
        case Statement::Kind::Assign:
          ev.vars()[st.name] = v;
          break;
        case Statement::Kind::Print:
          lines.push_back(render_value(v));
          break;
        case Statement::Kind::FinalAnswer:
          res.final_answer = v;
          break;
      }
      if (res.final_answer) break;  // short-circuit
    }
  } catch (const StepLimitExceeded& e) {
    res.status = ExecStatus::Timeout;
    res.message = e.what();
    res.final_answer.reset();
  } catch (const RuntimeFault& e) {
    res.status = ExecStatus::RuntimeError;
    res.message = e.what();
    res.final_answer.reset();
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) res.stdout_text += '\n';
    res.stdout_text += lines[i];
  }
  res.steps_used = std::min(ev.steps(), step_limit);
  return res;
}

ExecResult run_code(std::string_view code, std::int64_t step_limit) {
  try {
    Program p = parse_program(code);
    return execute(p, step_limit);
  } catch (const ParseError& e) {
    ExecResult res;
    res.status = ExecStatus::ParseError;
    res.message = e.what();
    return res;
  }
}

std::string format_feedback(const ExecResult& result, std::size_t feedback_char_limit) {
  std::string body;
  switch (result.status) {
    case ExecStatus::Ok:
      body = result.stdout_text.empty() ? "(no output)" : result.stdout_text;
      break;
    case ExecStatus::ParseError:
    case ExecStatus::RuntimeError:
      body = result.message;
      break;
    case ExecStatus::Timeout:
      body = "execution timed out";
      break;
  }
  if (body.size() > feedback_char_limit) {
    body.resize(feedback_char_limit);
    body += "...(truncated)";
  }
  return std::string(kFeedbackPrefix) + body;
}

}  // namespace simpletir
