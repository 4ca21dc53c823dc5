#include "simpletir/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace simpletir {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(to_double(key, cell));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(static_cast<int>(to_int(key, cell)));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

// One flat table "section.key" -> setter; doubles as the unknown-key check
// and the env-override enumeration.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.seed", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.run.seed = static_cast<std::uint64_t>(to_int(k, v));
       }},
      {"run.total_steps", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.run.total_steps = static_cast<int>(to_int(k, v));
       }},
      {"run.tasks_per_step", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.run.tasks_per_step = static_cast<int>(to_int(k, v));
       }},
      {"run.group_size", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.run.group_size = static_cast<int>(to_int(k, v));
       }},
      {"run.checkpoint_interval", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.run.checkpoint_interval = static_cast<int>(to_int(k, v));
       }},
      {"run.num_workers", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.run.num_workers = static_cast<int>(to_int(k, v));
       }},
      {"run.filter", [](RunConfig& c, const std::string&, const std::string& v) {
         c.run.filter = v;
       }},
      {"policy.alphabet", [](RunConfig& c, const std::string&, const std::string& v) {
         c.policy.alphabet = v;
       }},
      {"policy.context_orders", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.context_orders = to_int_list(k, v);
       }},
      {"policy.order_gains", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.order_gains = to_double_list(k, v);
       }},
      {"policy.capacity_log2", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.capacity_log2 = static_cast<int>(to_int(k, v));
       }},
      {"policy.init_scale", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.init_scale = to_double(k, v);
       }},
      {"policy.demo_weight", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.demo_weight = to_double(k, v);
       }},
      {"policy.demo_count", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.demo_count = static_cast<int>(to_int(k, v));
       }},
      {"policy.demo_echo_fraction", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.demo_echo_fraction = to_double(k, v);
       }},
      {"policy.demo_count_cap", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.policy.demo_count_cap = to_double(k, v);
       }},
      {"rollout.max_turns", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.rollout.max_turns = static_cast<int>(to_int(k, v));
       }},
      {"rollout.max_tokens_per_turn", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.rollout.max_tokens_per_turn = static_cast<int>(to_int(k, v));
       }},
      {"rollout.max_response_tokens", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.rollout.max_response_tokens = static_cast<int>(to_int(k, v));
       }},
      {"rollout.temperature", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.rollout.temperature = to_double(k, v);
       }},
      {"rollout.sandbox_step_limit", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.rollout.sandbox_step_limit = to_int(k, v);
       }},
      {"rollout.feedback_char_limit", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.rollout.feedback_char_limit = static_cast<int>(to_int(k, v));
       }},
      {"optim.eps_low", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.eps_low = to_double(k, v);
       }},
      {"optim.eps_high", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.eps_high = to_double(k, v);
       }},
      {"optim.learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.learning_rate = to_double(k, v);
       }},
      {"optim.grad_clip_norm", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.grad_clip_norm = to_double(k, v);
       }},
      {"optim.ppo_epochs", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.ppo_epochs = static_cast<int>(to_int(k, v));
       }},
      {"optim.adv_norm_epsilon", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.adv_norm_epsilon = to_double(k, v);
       }},
      {"optim.advantages_after_filter", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.advantages_after_filter = to_bool(k, v);
       }},
      {"optim.drop_degenerate_groups", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.optim.drop_degenerate_groups = to_bool(k, v);
       }},
      {"filters.low_prob_quantile", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.filters.low_prob_quantile = to_double(k, v);
       }},
      {"filters.high_ratio_threshold", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.filters.high_ratio_threshold = to_double(k, v);
       }},
      {"curriculum.enabled", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.curriculum.enabled = to_bool(k, v);
       }},
      {"curriculum.window", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.curriculum.window = static_cast<int>(to_int(k, v));
       }},
      {"curriculum.patience", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.curriculum.patience = static_cast<int>(to_int(k, v));
       }},
      {"curriculum.tolerance", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.curriculum.tolerance = to_double(k, v);
       }},
      {"curriculum.new_max_turns", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.curriculum.new_max_turns = static_cast<int>(to_int(k, v));
       }},
      {"curriculum.new_max_response_tokens",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.curriculum.new_max_response_tokens = static_cast<int>(to_int(k, v));
       }},
      {"tasks.depth1", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.tasks.depth1 = static_cast<int>(to_int(k, v));
       }},
      {"tasks.depth2", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.tasks.depth2 = static_cast<int>(to_int(k, v));
       }},
      {"tasks.depth3", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.tasks.depth3 = static_cast<int>(to_int(k, v));
       }},
      {"eval.samples_per_task", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.eval.samples_per_task = static_cast<int>(to_int(k, v));
       }},
      {"paths.out_dir", [](RunConfig& c, const std::string&, const std::string& v) {
         c.paths.out_dir = v;
       }},
      {"paths.tasks_file", [](RunConfig& c, const std::string&, const std::string& v) {
         c.paths.tasks_file = v;
       }},
      {"paths.metrics", [](RunConfig& c, const std::string&, const std::string& v) {
         c.paths.metrics = v;
       }},
      {"paths.trajectories", [](RunConfig& c, const std::string&, const std::string& v) {
         c.paths.trajectories = v;
       }},
      {"paths.checkpoints", [](RunConfig& c, const std::string&, const std::string& v) {
         c.paths.checkpoints = v;
       }},
  };
  return table;
}

void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void RunConfig::validate() const {
  require(run.total_steps >= 0, "run.total_steps must be >= 0");
  require(run.tasks_per_step >= 1, "run.tasks_per_step must be >= 1");
  require(run.group_size >= 2, "run.group_size must be >= 2");
  require(run.checkpoint_interval >= 1, "run.checkpoint_interval must be >= 1");
  require(run.num_workers >= 1, "run.num_workers must be >= 1");
  require(!run.filter.empty(), "run.filter must be set");
  {
    std::stringstream ss(run.filter);
    std::string name;
    bool any = false;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      any = true;
      if (name != "simpletir" && name != "low_prob" && name != "high_ratio" &&
          name != "none") {
        throw ConfigError("run.filter: unknown strategy '" + name + "'");
      }
    }
    require(any, "run.filter must name at least one strategy");
  }
  require(!policy.alphabet.empty(), "policy.alphabet must be set");
  require(!policy.context_orders.empty(), "policy.context_orders must be nonempty");
  for (int n : policy.context_orders) require(n >= 1, "context order must be >= 1");
  require(policy.order_gains.empty() ||
              policy.order_gains.size() == policy.context_orders.size(),
          "policy.order_gains must match context_orders in length");
  for (double g : policy.order_gains) require(g > 0.0, "order gains must be positive");
  require(policy.capacity_log2 >= 8 && policy.capacity_log2 <= 30,
          "policy.capacity_log2 must be in [8, 30]");
  require(policy.init_scale >= 0.0, "policy.init_scale must be >= 0");
  require(policy.demo_weight >= 0.0, "policy.demo_weight must be >= 0");
  require(policy.demo_count >= 0, "policy.demo_count must be >= 0");
  require(policy.demo_echo_fraction >= 0.0 && policy.demo_echo_fraction <= 1.0,
          "policy.demo_echo_fraction must be in [0, 1]");
  require(policy.demo_count_cap >= 0.0, "policy.demo_count_cap must be >= 0");
  require(rollout.max_turns >= 1, "rollout.max_turns must be >= 1");
  require(rollout.max_tokens_per_turn >= 1, "rollout.max_tokens_per_turn must be >= 1");
  require(rollout.max_response_tokens >= 1, "rollout.max_response_tokens must be >= 1");
  require(rollout.temperature > 0.0, "rollout.temperature must be > 0");
  require(rollout.sandbox_step_limit >= 1, "rollout.sandbox_step_limit must be >= 1");
  require(rollout.feedback_char_limit >= 16, "rollout.feedback_char_limit must be >= 16");
  require(optim.eps_low > 0.0 && optim.eps_low < 1.0, "optim.eps_low must be in (0, 1)");
  require(optim.eps_high > 0.0 && optim.eps_high < 1.0, "optim.eps_high must be in (0, 1)");
  require(optim.learning_rate > 0.0, "optim.learning_rate must be > 0");
  require(optim.grad_clip_norm > 0.0, "optim.grad_clip_norm must be > 0");
  require(optim.ppo_epochs >= 1, "optim.ppo_epochs must be >= 1");
  require(optim.adv_norm_epsilon > 0.0, "optim.adv_norm_epsilon must be > 0");
  require(filters.low_prob_quantile > 0.0 && filters.low_prob_quantile < 1.0,
          "filters.low_prob_quantile must be in (0, 1)");
  require(filters.high_ratio_threshold > 1.0, "filters.high_ratio_threshold must be > 1");
  require(curriculum.window >= 1, "curriculum.window must be >= 1");
  require(curriculum.patience >= 1, "curriculum.patience must be >= 1");
  require(curriculum.tolerance > 0.0, "curriculum.tolerance must be > 0");
  require(curriculum.new_max_turns >= rollout.max_turns,
          "curriculum.new_max_turns must be >= rollout.max_turns");
  require(curriculum.new_max_response_tokens >= rollout.max_response_tokens,
          "curriculum.new_max_response_tokens must be >= rollout.max_response_tokens");
  require(tasks.depth1 >= 1, "tasks.depth1 must be >= 1");
  require(tasks.depth2 >= 0, "tasks.depth2 must be >= 0");
  require(tasks.depth3 >= 0, "tasks.depth3 must be >= 0");
  require(eval.samples_per_task >= 1, "eval.samples_per_task must be >= 1");
  require(!paths.out_dir.empty(), "paths.out_dir must be set");
  require(!paths.metrics.empty(), "paths.metrics must be set");
  require(!paths.checkpoints.empty(), "paths.checkpoints must be set");
}

RunConfig default_config() { return RunConfig{}; }

void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value) {
  auto it = setters().find(dotted_key);
  if (it == setters().end()) throw ConfigError("unknown key " + dotted_key);
  it->second(config, dotted_key, value);
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    }
    std::string full = section + "." + key;
    auto it = setters().find(full);
    if (it == setters().end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key " + full);
    }
    it->second(config, full, value);
  }
  return config;
}

void apply_env_overrides(RunConfig& config) {
  for (const auto& [full, setter] : setters()) {
    std::string env = "SIMPLETIR_";
    for (char c : full) {
      env += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    if (const char* v = std::getenv(env.c_str())) {
      setter(config, full, v);
    }
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig config = parse_config(buf.str());
  apply_env_overrides(config);
  config.validate();
  return config;
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "[run]\n";
  o << "seed = " << c.run.seed << "\n";
  o << "total_steps = " << c.run.total_steps << "\n";
  o << "tasks_per_step = " << c.run.tasks_per_step << "\n";
  o << "group_size = " << c.run.group_size << "\n";
  o << "checkpoint_interval = " << c.run.checkpoint_interval << "\n";
  o << "num_workers = " << c.run.num_workers << "\n";
  o << "filter = " << c.run.filter << "\n";
  o << "\n[policy]\n";
  o << "alphabet = " << c.policy.alphabet << "\n";
  o << "context_orders = ";
  for (std::size_t i = 0; i < c.policy.context_orders.size(); ++i) {
    if (i) o << ",";
    o << c.policy.context_orders[i];
  }
  o << "\n";
  if (!c.policy.order_gains.empty()) {
    o << "order_gains = ";
    for (std::size_t i = 0; i < c.policy.order_gains.size(); ++i) {
      if (i) o << ",";
      o << c.policy.order_gains[i];
    }
    o << "\n";
  }
  o << "capacity_log2 = " << c.policy.capacity_log2 << "\n";
  o << "init_scale = " << c.policy.init_scale << "\n";
  o << "demo_weight = " << c.policy.demo_weight << "\n";
  o << "demo_count = " << c.policy.demo_count << "\n";
  o << "demo_echo_fraction = " << c.policy.demo_echo_fraction << "\n";
  o << "demo_count_cap = " << c.policy.demo_count_cap << "\n";
  o << "\n[rollout]\n";
  o << "max_turns = " << c.rollout.max_turns << "\n";
  o << "max_tokens_per_turn = " << c.rollout.max_tokens_per_turn << "\n";
  o << "max_response_tokens = " << c.rollout.max_response_tokens << "\n";
  o << "temperature = " << c.rollout.temperature << "\n";
  o << "sandbox_step_limit = " << c.rollout.sandbox_step_limit << "\n";
  o << "feedback_char_limit = " << c.rollout.feedback_char_limit << "\n";
  o << "\n[optim]\n";
  o << "eps_low = " << c.optim.eps_low << "\n";
  o << "eps_high = " << c.optim.eps_high << "\n";
  o << "learning_rate = " << c.optim.learning_rate << "\n";
  o << "grad_clip_norm = " << c.optim.grad_clip_norm << "\n";
  o << "ppo_epochs = " << c.optim.ppo_epochs << "\n";
  o << "adv_norm_epsilon = " << c.optim.adv_norm_epsilon << "\n";
  o << "advantages_after_filter = " << b(c.optim.advantages_after_filter) << "\n";
  o << "drop_degenerate_groups = " << b(c.optim.drop_degenerate_groups) << "\n";
  o << "\n[filters]\n";
  o << "low_prob_quantile = " << c.filters.low_prob_quantile << "\n";
  o << "high_ratio_threshold = " << c.filters.high_ratio_threshold << "\n";
  o << "\n[curriculum]\n";
  o << "enabled = " << b(c.curriculum.enabled) << "\n";
  o << "window = " << c.curriculum.window << "\n";
  o << "patience = " << c.curriculum.patience << "\n";
  o << "tolerance = " << c.curriculum.tolerance << "\n";
  o << "new_max_turns = " << c.curriculum.new_max_turns << "\n";
  o << "new_max_response_tokens = " << c.curriculum.new_max_response_tokens << "\n";
  o << "\n[tasks]\n";
  o << "depth1 = " << c.tasks.depth1 << "\n";
  o << "depth2 = " << c.tasks.depth2 << "\n";
  o << "depth3 = " << c.tasks.depth3 << "\n";
  o << "\n[eval]\n";
  o << "samples_per_task = " << c.eval.samples_per_task << "\n";
  o << "\n[paths]\n";
  o << "out_dir = " << c.paths.out_dir << "\n";
  if (!c.paths.tasks_file.empty()) o << "tasks_file = " << c.paths.tasks_file << "\n";
  o << "metrics = " << c.paths.metrics << "\n";
  if (!c.paths.trajectories.empty()) o << "trajectories = " << c.paths.trajectories << "\n";
  o << "checkpoints = " << c.paths.checkpoints << "\n";
  return o.str();
}

}  // namespace simpletir
