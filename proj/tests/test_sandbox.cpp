#include <string>

#include "doctest.h"
#include "simpletir/sandbox.hpp"

using namespace simpletir;

TEST_CASE("arithmetic precedence and associativity") {
  CHECK(run_code("print(2+3*4)", 1000).stdout_text == "14");
  CHECK(run_code("print((2+3)*4)", 1000).stdout_text == "20");
  CHECK(run_code("print(2**3**2)", 1000).stdout_text == "512");  // ** right-assoc
  CHECK(run_code("print(-2**2)", 1000).stdout_text == "-4");     // ** binds above unary minus
  CHECK(run_code("print(2*-3)", 1000).stdout_text == "-6");
}

TEST_CASE("python-style modulo") {
  CHECK(run_code("print(-7%3)", 1000).stdout_text == "2");
  CHECK(run_code("print(7%-3)", 1000).stdout_text == "-2");
  CHECK(run_code("print(7%3)", 1000).stdout_text == "1");
}

TEST_CASE("numeric model: int when closed, double otherwise") {
  CHECK(run_code("print(4/2)", 1000).stdout_text == "2.0");  // true division is double
  CHECK(run_code("print(2**-1)", 1000).stdout_text == "0.5");
  CHECK(run_code("print(2.5+1)", 1000).stdout_text == "3.5");
  CHECK(run_code("print(3-5)", 1000).stdout_text == "-2");
}

TEST_CASE("runtime errors") {
  ExecResult div = run_code("print(1/0)", 1000);
  CHECK(div.status == ExecStatus::RuntimeError);
  CHECK(div.message == "division by zero");
  CHECK_FALSE(div.final_answer.has_value());

  ExecResult mod = run_code("print(5%0)", 1000);
  CHECK(mod.status == ExecStatus::RuntimeError);
  CHECK(mod.message == "modulo by zero");
}

TEST_CASE("parse errors carry position") {
  ExecResult r = run_code("x = 1 +", 1000);
  CHECK(r.status == ExecStatus::ParseError);
  CHECK(r.message.find("line 1") != std::string::npos);
  CHECK(run_code("print(x)", 1000).status == ExecStatus::ParseError);  // undefined variable
}

TEST_CASE("step limit produces a timeout") {
  ExecResult r = run_code("print(1+1)", 2);
  CHECK(r.status == ExecStatus::Timeout);
  CHECK(r.steps_used <= 2);
}

TEST_CASE("final_answer halts the program") {
  ExecResult r = run_code("final_answer(1)\nprint(2)", 1000);
  CHECK(r.status == ExecStatus::Ok);
  CHECK(r.stdout_text.empty());
  REQUIRE(r.final_answer.has_value());
  CHECK(as_double(*r.final_answer) == 1.0);
}

TEST_CASE("appendix example evaluates to 1302.678") {
  ExecResult r = run_code("answer = 5 + 3 + 1294.678\nfinal_answer(answer)", 10000);
  REQUIRE(r.status == ExecStatus::Ok);
  REQUIRE(r.final_answer.has_value());
  CHECK(render_value(*r.final_answer) == "1302.678");
  CHECK(as_double(*r.final_answer) == doctest::Approx(1302.678).epsilon(1e-12));
  CHECK(format_feedback(r) == "Code Execution Result: (no output)");
}

TEST_CASE("feedback prefix bytes are exact") {
  static const char kExpected[] = "Code Execution Result: ";
  CHECK(kFeedbackPrefix == kExpected);
  std::string fb = format_feedback(run_code("print(2+3)", 1000));
  REQUIRE(fb.size() >= sizeof(kExpected) - 1);
  CHECK(fb.compare(0, sizeof(kExpected) - 1, kExpected) == 0);
  CHECK(fb == "Code Execution Result: 5");
}

TEST_CASE("feedback bodies for each status") {
  CHECK(format_feedback(run_code("final_answer(0)", 1000)) ==
        "Code Execution Result: (no output)");
  CHECK(format_feedback(run_code("print(1/0)", 1000)) ==
        "Code Execution Result: division by zero");
  CHECK(format_feedback(run_code("print(1+1)", 1)) ==
        "Code Execution Result: execution timed out");
}

TEST_CASE("feedback truncation at the char limit") {
  std::string code;
  for (int i = 0; i < 40; ++i) code += "print(123456789*987654321+" + std::to_string(i) + ")\n";
  ExecResult r = run_code(code, 100000);
  REQUIRE(r.status == ExecStatus::Ok);
  REQUIRE(r.stdout_text.size() > 512);
  std::string fb = format_feedback(r, 512);
  CHECK(fb.size() == std::string("Code Execution Result: ").size() + 512 +
                         std::string("...(truncated)").size());
  CHECK(fb.substr(fb.size() - 14) == "...(truncated)");
}

TEST_CASE("execution is deterministic") {
  const char* code = "a = 3*7\nb = a%5\nprint(a+b)\nfinal_answer(a*b)";
  ExecResult r1 = run_code(code, 10000);
  ExecResult r2 = run_code(code, 10000);
  CHECK(r1.stdout_text == r2.stdout_text);
  CHECK(r1.steps_used == r2.steps_used);
  CHECK(render_value(*r1.final_answer) == render_value(*r2.final_answer));
}
