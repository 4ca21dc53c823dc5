#include "simpletir/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace simpletir {

using nlohmann::json;

double GradBuffer::l2_norm() const {
  double sum = 0.0;
  for (std::size_t s : touched_) sum += values_[s] * values_[s];
  return std::sqrt(sum);
}

bool GradBuffer::all_finite() const {
  for (std::size_t s : touched_) {
    if (!std::isfinite(values_[s])) return false;
  }
  return true;
}

void GradBuffer::scale(double s) {
  for (std::size_t slot : touched_) values_[slot] *= s;
}

Policy::Policy(PolicyConfig config) : config_(std::move(config)) {
  if (config_.vocab_size <= 0) throw std::invalid_argument("vocab_size must be positive");
  if (config_.context_orders.empty()) throw std::invalid_argument("need at least one context order");
  for (int n : config_.context_orders) {
    if (n <= 0) throw std::invalid_argument("context order must be positive");
  }
  if (config_.capacity_log2 < 8 || config_.capacity_log2 > 30) {
    throw std::invalid_argument("capacity_log2 out of range");
  }
  if (config_.order_gains.empty()) {
    config_.order_gains.assign(config_.context_orders.size(), 1.0);
  }
  if (config_.order_gains.size() != config_.context_orders.size()) {
    throw std::invalid_argument("order_gains must match context_orders in length");
  }
  for (double g : config_.order_gains) {
    if (!(g > 0.0)) throw std::invalid_argument("order gains must be positive");
  }
  weights_.assign(std::size_t{1} << config_.capacity_log2, 0.0);
  mask_ = weights_.size() - 1;
}

ContextKey Policy::context(std::span<const int> prefix) const {
  ContextKey key;
  key.order_hashes.reserve(config_.context_orders.size());
  const int begin = config_.vocab_size;  // reserved pad marker
  for (std::size_t k = 0; k < config_.context_orders.size(); ++k) {
    int n = config_.context_orders[k];
    std::uint64_t h = splitmix64(0xc0ffee ^ (std::uint64_t(n) << 32) ^ k);
    for (int i = n; i >= 1; --i) {
      int id = (static_cast<std::size_t>(i) <= prefix.size())
                   ? prefix[prefix.size() - static_cast<std::size_t>(i)]
                   : begin;
      h = splitmix64(h ^ static_cast<std::uint64_t>(id + 1));
    }
    key.order_hashes.push_back(h);
  }
  return key;
}

std::size_t Policy::slot(std::size_t order_index, std::uint64_t ctx_hash, int token) const {
  (void)order_index;  // the order is already baked into ctx_hash
  return static_cast<std::size_t>(mix64(ctx_hash, static_cast<std::uint64_t>(token + 1))) & mask_;
}

void Policy::logits(const ContextKey& ctx, std::span<double> out) const {
  const int V = config_.vocab_size;
  for (int j = 0; j < V; ++j) out[j] = 0.0;
  for (std::size_t k = 0; k < ctx.order_hashes.size(); ++k) {
    std::uint64_t h = ctx.order_hashes[k];
    double gain = config_.order_gains[k];
    for (int j = 0; j < V; ++j) out[j] += gain * weights_[slot(k, h, j)];
  }
}

double Policy::token_distribution(const ContextKey& ctx, double temperature,
                                  std::span<double> probs_out) const {
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  const int V = config_.vocab_size;
  logits(ctx, probs_out);
  double inv_t = 1.0 / temperature;
  double max_z = probs_out[0] * inv_t;
  for (int j = 0; j < V; ++j) {
    probs_out[j] *= inv_t;
    max_z = std::max(max_z, probs_out[j]);
  }
  double sum = 0.0;
  for (int j = 0; j < V; ++j) {
    probs_out[j] = std::exp(probs_out[j] - max_z);
    sum += probs_out[j];
  }
  for (int j = 0; j < V; ++j) probs_out[j] /= sum;
  return max_z + std::log(sum);  // log normalizer of tempered logits
}

double Policy::token_logprob(const ContextKey& ctx, double temperature, int token) const {
  const int V = config_.vocab_size;
  std::vector<double> z(static_cast<std::size_t>(V));
  logits(ctx, z);
  double inv_t = 1.0 / temperature;
  double max_z = z[0] * inv_t;
  for (int j = 0; j < V; ++j) {
    z[j] *= inv_t;
    max_z = std::max(max_z, z[j]);
  }
  double sum = 0.0;
  for (int j = 0; j < V; ++j) sum += std::exp(z[j] - max_z);
  return z[token] - max_z - std::log(sum);
}

Policy::Sample Policy::sample_token(const ContextKey& ctx, double temperature, Rng& rng) const {
  const int V = config_.vocab_size;
  std::vector<double> probs(static_cast<std::size_t>(V));
  token_distribution(ctx, temperature, probs);
  double u = rng.next_double();
  double acc = 0.0;
  int chosen = V - 1;
  for (int j = 0; j < V; ++j) {
    acc += probs[j];
    if (u < acc) {
      chosen = j;
      break;
    }
  }
  return {chosen, std::log(probs[chosen])};
}

void Policy::accumulate_param_grad(const ContextKey& ctx, std::span<const double> logit_grad,
                                   GradBuffer& grad_buffer) const {
  const int V = config_.vocab_size;
  for (std::size_t k = 0; k < ctx.order_hashes.size(); ++k) {
    std::uint64_t h = ctx.order_hashes[k];
    double gain = config_.order_gains[k];
    for (int j = 0; j < V; ++j) {
      double g = gain * logit_grad[j];
      if (g != 0.0) grad_buffer.add(slot(k, h, j), g);
    }
  }
}

void Policy::slots_for(const ContextKey& ctx, int token, std::vector<std::size_t>& out) const {
  out.clear();
  for (std::size_t k = 0; k < ctx.order_hashes.size(); ++k) {
    out.push_back(slot(k, ctx.order_hashes[k], token));
  }
}

void Policy::add_weight(const ContextKey& ctx, int token, double delta) {
  // Split across orders so the resulting logit change equals delta.
  const double share = delta / static_cast<double>(ctx.order_hashes.size());
  for (std::size_t k = 0; k < ctx.order_hashes.size(); ++k) {
    weights_[slot(k, ctx.order_hashes[k], token)] += share / config_.order_gains[k];
  }
}

void Policy::apply(const GradBuffer& grad, double step_scale) {
  for (std::size_t s : grad.touched()) weights_[s] += step_scale * grad.at(s);
}

void Policy::save_checkpoint(const std::string& path) const {
  json entries = json::array();
  for (std::size_t s = 0; s < weights_.size(); ++s) {
    if (weights_[s] != 0.0) entries.push_back({s, weights_[s]});
  }
  json j = {{"format", "simpletir-policy"},
            {"version", 1},
            {"context_orders", config_.context_orders},
            {"order_gains", config_.order_gains},
            {"vocab_size", config_.vocab_size},
            {"capacity_log2", config_.capacity_log2},
            {"temperature", config_.temperature},
            {"entries", std::move(entries)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump() << '\n';
}

Policy Policy::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "simpletir-policy" || j.value("version", 0) != 1) {
    throw std::runtime_error("unrecognized checkpoint header in " + path);
  }
  PolicyConfig cfg;
  cfg.context_orders = j.at("context_orders").get<std::vector<int>>();
  cfg.order_gains = j.at("order_gains").get<std::vector<double>>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.capacity_log2 = j.at("capacity_log2").get<int>();
  cfg.temperature = j.at("temperature").get<double>();
  Policy p(cfg);
  for (const auto& e : j.at("entries")) {
    p.weights_[e.at(0).get<std::size_t>()] = e.at(1).get<double>();
  }
  return p;
}

}  // namespace simpletir
