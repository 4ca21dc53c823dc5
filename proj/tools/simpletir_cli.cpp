// Command-line front end; talks to the core exclusively through the C API.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "simpletir.h"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string seed;
  std::string filter;
  std::string steps;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (INI-style)");
  cmd->add_option("--seed", opts.seed, "Override run.seed");
  cmd->add_option("--filter", opts.filter, "Override run.filter");
  cmd->add_option("--steps", opts.steps, "Override run.total_steps");
  cmd->add_option("--out-dir", opts.out_dir, "Override paths.out_dir");
}

int fail(int status) {
  std::cerr << "error: " << simpletir_last_error() << "\n";
  return status;
}

// Builds the config handle from file/defaults plus flag overrides.
int make_config(const CommonOpts& opts, simpletir_config** out) {
  int rc = opts.config_path.empty() ? simpletir_config_default(out)
                                    : simpletir_config_load(opts.config_path.c_str(), out);
  if (rc != SIMPLETIR_OK) return rc;
  auto set = [&](const char* key, const std::string& value) {
    return value.empty() ? SIMPLETIR_OK : simpletir_config_set(*out, key, value.c_str());
  };
  if ((rc = set("run.seed", opts.seed)) != SIMPLETIR_OK) return rc;
  if ((rc = set("run.filter", opts.filter)) != SIMPLETIR_OK) return rc;
  if ((rc = set("run.total_steps", opts.steps)) != SIMPLETIR_OK) return rc;
  if ((rc = set("paths.out_dir", opts.out_dir)) != SIMPLETIR_OK) return rc;
  return SIMPLETIR_OK;
}

int progress_printer(int step, double mean_reward, double grad_norm, void*) {
  if (step % 25 == 0) {
    std::fprintf(stderr, "step %d  mean_reward %.3f  grad_norm %.4f\n", step, mean_reward,
                 grad_norm);
  }
  return 1;
}

int cmd_train(const CommonOpts& opts) {
  simpletir_config* config = nullptr;
  int rc = make_config(opts, &config);
  if (rc != SIMPLETIR_OK) return fail(rc);
  int steps_done = 0;
  rc = simpletir_train(config, progress_printer, nullptr, &steps_done);
  simpletir_config_free(config);
  if (rc != SIMPLETIR_OK) return fail(rc);
  std::cout << "trained " << steps_done << " steps\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint) {
  simpletir_config* config = nullptr;
  int rc = make_config(opts, &config);
  if (rc != SIMPLETIR_OK) return fail(rc);
  char* report = nullptr;
  rc = simpletir_eval(config, checkpoint.c_str(), &report);
  simpletir_config_free(config);
  if (rc != SIMPLETIR_OK) return fail(rc);
  std::cout << report << "\n";
  simpletir_string_free(report);
  return 0;
}

int cmd_analyze(const std::string& path) {
  char* report = nullptr;
  int rc = simpletir_analyze(path.c_str(), &report);
  if (rc != SIMPLETIR_OK) return fail(rc);
  std::cout << report << "\n";
  simpletir_string_free(report);
  return 0;
}

int cmd_exec() {
  std::ostringstream code;
  code << std::cin.rdbuf();
  char* feedback = nullptr;
  char* answer = nullptr;
  int rc = simpletir_exec_code(code.str().c_str(), 10000, &feedback, &answer);
  if (rc != SIMPLETIR_OK) return fail(rc);
  std::cout << feedback << "\n";
  if (answer) {
    std::cout << "Final Answer: " << answer << "\n";
    simpletir_string_free(answer);
  }
  simpletir_string_free(feedback);
  return 0;
}

int cmd_verify_prop1(const CommonOpts& opts, unsigned long long seed) {
  simpletir_config* config = nullptr;
  int rc = make_config(opts, &config);
  if (rc != SIMPLETIR_OK) return fail(rc);
  char* report = nullptr;
  rc = simpletir_verify_prop1(config, seed, &report);
  simpletir_config_free(config);
  if (rc != SIMPLETIR_OK) return fail(rc);
  std::cout << report << "\n";
  simpletir_string_free(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-turn tool-integrated RL trainer (desk scale)"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Run the training loop");
  add_common(train, train_opts);

  CommonOpts eval_opts;
  std::string checkpoint;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint (average@N per difficulty)");
  eval->add_option("checkpoint", checkpoint, "Policy checkpoint path")->required();
  add_common(eval, eval_opts);

  std::string analyze_path;
  CLI::App* analyze = app.add_subcommand("analyze", "Statistics over a trajectory JSONL file");
  analyze->add_option("trajectories", analyze_path, "JSONL path")->required();

  CLI::App* exec = app.add_subcommand("exec", "Execute sandbox code from stdin");

  CommonOpts verify_opts;
  unsigned long long verify_seed = 0;
  CLI::App* verify = app.add_subcommand("verify-prop1",
                                        "Check gradient-norm prediction on a fresh batch");
  verify->add_option("--batch-seed", verify_seed, "Seed for the sampled batch");
  add_common(verify, verify_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : SIMPLETIR_ERR_USAGE;
  }

  if (train->parsed()) return cmd_train(train_opts);
  if (eval->parsed()) return cmd_eval(eval_opts, checkpoint);
  if (analyze->parsed()) return cmd_analyze(analyze_path);
  if (exec->parsed()) return cmd_exec();
  if (verify->parsed()) return cmd_verify_prop1(verify_opts, verify_seed);
  return SIMPLETIR_ERR_USAGE;
}
