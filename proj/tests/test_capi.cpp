#include <cstring>
#include <string>

#include "doctest.h"
#include "simpletir.h"

namespace {

struct Str {
  char* p = nullptr;
  ~Str() { simpletir_string_free(p); }
  std::string view() const { return p ? std::string(p) : std::string(); }
};

}  // namespace

TEST_CASE("c api: config lifecycle and error codes") {
  simpletir_config* cfg = nullptr;
  REQUIRE(simpletir_config_default(&cfg) == SIMPLETIR_OK);
  REQUIRE(cfg != nullptr);

  CHECK(simpletir_config_set(cfg, "run.total_steps", "2") == SIMPLETIR_OK);
  CHECK(simpletir_config_set(cfg, "run.nonsense", "1") == SIMPLETIR_ERR_CONFIG);
  CHECK(std::string(simpletir_last_error()).find("nonsense") != std::string::npos);
  CHECK(simpletir_config_set(cfg, "run.total_steps", "banana") == SIMPLETIR_ERR_CONFIG);
  CHECK(simpletir_config_set(nullptr, "run.seed", "1") == SIMPLETIR_ERR_USAGE);

  Str text;
  CHECK(simpletir_config_dump(cfg, &text.p) == SIMPLETIR_OK);
  CHECK(text.view().find("total_steps = 2") != std::string::npos);
  simpletir_config_free(cfg);

  simpletir_config* missing = nullptr;
  CHECK(simpletir_config_load("no/such/file.ini", &missing) == SIMPLETIR_ERR_CONFIG);
}

TEST_CASE("c api: sandbox execution") {
  Str feedback, answer;
  REQUIRE(simpletir_exec_code("answer = 5 + 3 + 1294.678\nfinal_answer(answer)", 10000,
                              &feedback.p, &answer.p) == SIMPLETIR_OK);
  CHECK(feedback.view() == "Code Execution Result: (no output)");
  CHECK(answer.view() == "1302.678");

  Str fb2, ans2;
  REQUIRE(simpletir_exec_code("print(1/0)", 10000, &fb2.p, &ans2.p) == SIMPLETIR_OK);
  CHECK(fb2.view() == "Code Execution Result: division by zero");
  CHECK(ans2.p == nullptr);

  CHECK(simpletir_exec_code(nullptr, 10000, &fb2.p, nullptr) == SIMPLETIR_ERR_USAGE);
}

TEST_CASE("c api: tiny training run with progress callback, then eval") {
  simpletir_config* cfg = nullptr;
  REQUIRE(simpletir_config_default(&cfg) == SIMPLETIR_OK);
  simpletir_config_set(cfg, "run.total_steps", "2");
  simpletir_config_set(cfg, "run.group_size", "4");
  simpletir_config_set(cfg, "run.tasks_per_step", "2");
  simpletir_config_set(cfg, "tasks.depth1", "2");
  simpletir_config_set(cfg, "tasks.depth2", "1");
  simpletir_config_set(cfg, "tasks.depth3", "1");
  simpletir_config_set(cfg, "policy.demo_count", "32");
  simpletir_config_set(cfg, "rollout.max_turns", "2");
  simpletir_config_set(cfg, "rollout.max_tokens_per_turn", "48");
  simpletir_config_set(cfg, "rollout.max_response_tokens", "96");
  simpletir_config_set(cfg, "eval.samples_per_task", "2");
  simpletir_config_set(cfg, "paths.out_dir", "test_out/capi_run");

  int calls = 0;
  int steps = -1;
  auto progress = [](int, double, double, void* user) -> int {
    ++*static_cast<int*>(user);
    return 1;
  };
  REQUIRE(simpletir_train(cfg, progress, &calls, &steps) == SIMPLETIR_OK);
  CHECK(steps == 2);
  CHECK(calls == 2);

  Str report;
  REQUIRE(simpletir_eval(cfg, "test_out/capi_run/checkpoints/final.json", &report.p) ==
          SIMPLETIR_OK);
  CHECK(report.view().find("solve_rate_by_difficulty") != std::string::npos);
  CHECK(simpletir_eval(cfg, "no/such/ckpt.json", &report.p) == SIMPLETIR_ERR_RUNTIME);
  simpletir_config_free(cfg);
}

TEST_CASE("c api: prop1 verification") {
  simpletir_config* cfg = nullptr;
  REQUIRE(simpletir_config_default(&cfg) == SIMPLETIR_OK);
  simpletir_config_set(cfg, "run.group_size", "4");
  simpletir_config_set(cfg, "run.tasks_per_step", "2");
  simpletir_config_set(cfg, "tasks.depth1", "2");
  simpletir_config_set(cfg, "tasks.depth2", "1");
  simpletir_config_set(cfg, "tasks.depth3", "1");
  simpletir_config_set(cfg, "policy.demo_count", "32");
  simpletir_config_set(cfg, "rollout.max_turns", "2");
  simpletir_config_set(cfg, "rollout.max_tokens_per_turn", "48");
  simpletir_config_set(cfg, "rollout.max_response_tokens", "96");

  Str report;
  REQUIRE(simpletir_verify_prop1(cfg, 11, &report.p) == SIMPLETIR_OK);
  std::string j = report.view();
  CHECK(j.find("max_analytic_error") != std::string::npos);
  CHECK(j.find("tokens_checked") != std::string::npos);
  simpletir_config_free(cfg);
}
