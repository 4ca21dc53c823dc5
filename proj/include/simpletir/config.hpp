#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace simpletir {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full run configuration. Sections mirror the struct groups below; the file
// grammar is INI-style ([section], key = value, '#' comments). Unknown
// sections or keys are rejected. After parsing, any environment variable
// SIMPLETIR_<SECTION>_<KEY> (upper case) overrides the file value.
struct RunConfig {
  struct Run {
    std::uint64_t seed = 0;
    int total_steps = 500;
    int tasks_per_step = 8;
    int group_size = 16;
    int checkpoint_interval = 50;
    int num_workers = 1;
    std::string filter = "simpletir";
  } run;

  struct Policy {
    std::string alphabet = "ascii";       // "ascii" or the literal characters
    std::vector<int> context_orders{2, 4, 8, 16, 24};
    std::vector<double> order_gains;  // empty: all 1
    int capacity_log2 = 20;
    double init_scale = 0.0;              // gaussian noise on touched demo slots
    double demo_weight = 3.5;             // count-fit weight of format demos
    int demo_count = 1280;                // format demonstrations per difficulty
    double demo_echo_fraction = 1.0;      // share of demos that echo the question
    double demo_count_cap = 4.0;          // count clip in the demo fit (0 = off)
  } policy;

  struct Rollout {
    int max_turns = 5;
    int max_tokens_per_turn = 256;
    int max_response_tokens = 1024;
    double temperature = 1.0;
    std::int64_t sandbox_step_limit = 10000;
    int feedback_char_limit = 512;
  } rollout;

  struct Optim {
    double eps_low = 0.2;
    double eps_high = 0.28;
    double learning_rate = 100.0;  // logits are raw table entries; see README
    double grad_clip_norm = 1.0;
    int ppo_epochs = 4;
    double adv_norm_epsilon = 1e-6;
    bool advantages_after_filter = false;
    bool drop_degenerate_groups = false;  // DAPO-style 0%/100% group filtering
  } optim;

  struct Filters {
    double low_prob_quantile = 0.02;
    double high_ratio_threshold = 5.0;
  } filters;

  struct Curriculum {
    bool enabled = true;
    int window = 50;            // moving-average window over response length
    int patience = 100;         // consecutive plateau steps required
    double tolerance = 0.02;    // relative change counting as plateau
    int new_max_turns = 10;
    int new_max_response_tokens = 2048;
  } curriculum;

  struct Tasks {
    int depth1 = 16;
    int depth2 = 8;
    int depth3 = 8;
  } tasks;

  struct Eval {
    int samples_per_task = 32;
  } eval;

  struct Paths {
    std::string out_dir = "out";
    std::string tasks_file;        // empty: generate from seed
    std::string metrics = "metrics.csv";
    std::string trajectories;      // empty: no trajectory log
    std::string checkpoints = "checkpoints";
  } paths;

  void validate() const;  // throws ConfigError
};

RunConfig default_config();
// Sets one field by its dotted "section.key" name; throws ConfigError on an
// unknown key or a malformed value.
void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);      // parse + env overrides + validate
void apply_env_overrides(RunConfig& config);
std::string dump_config(const RunConfig& config);    // round-trips via parse_config

}  // namespace simpletir
