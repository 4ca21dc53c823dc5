#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simpletir/rng.hpp"

namespace simpletir {

struct PolicyConfig {
  // Suffix n-gram orders whose hashed weight entries are summed into the
  // logits. A single order reproduces a plain n-gram table; several orders
  // give backed-off sharing between short and long contexts.
  std::vector<int> context_orders{4};
  // Per-order multipliers on the table entries: logits are sums of
  // gain_k * w[slot_k]. A larger gain makes that order's slots move faster
  // under the same objective gradient (the effective logit step scales with
  // gain^2), which concentrates learning in specific contexts while shared
  // short contexts stay near their initialization. Empty means all 1.
  std::vector<double> order_gains;
  int vocab_size = 0;
  int capacity_log2 = 20;  // weight table entries, power of two
  double temperature = 1.0;
};

// Hashed context of the flat token sequence, one suffix hash per order.
struct ContextKey {
  std::vector<std::uint64_t> order_hashes;
  bool operator==(const ContextKey&) const = default;
};

// Sparse-touch gradient accumulator over the flat weight table.
class GradBuffer {
 public:
  explicit GradBuffer(std::size_t capacity) : values_(capacity, 0.0), stamp_(capacity, 0) {}

  void add(std::size_t slot, double g) {
    if (stamp_[slot] != epoch_) {
      stamp_[slot] = epoch_;
      values_[slot] = 0.0;
      touched_.push_back(slot);
    }
    values_[slot] += g;
  }

  void clear() {
    ++epoch_;
    touched_.clear();
  }

  double at(std::size_t slot) const { return stamp_[slot] == epoch_ ? values_[slot] : 0.0; }
  const std::vector<std::size_t>& touched() const { return touched_; }
  double l2_norm() const;
  bool all_finite() const;
  void scale(double s);

 private:
  std::vector<double> values_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::size_t> touched_;
  std::uint32_t epoch_ = 1;
};

// Table-lookup softmax policy over the toy vocabulary. Parameters are the
// logits themselves (per hashed context), so policy-gradient math is exact
// and framework-free. Hash collisions act as weight sharing.
class Policy {
 public:
  explicit Policy(PolicyConfig config);

  const PolicyConfig& config() const { return config_; }
  int vocab_size() const { return config_.vocab_size; }
  std::size_t capacity() const { return weights_.size(); }

  // prefix = flat token ids so far (prompt + all prior segments); the key is
  // derived from the last-n ids per order, left-padded with a begin marker.
  ContextKey context(std::span<const int> prefix) const;

  // Raw logits, no normalization.
  void logits(const ContextKey& ctx, std::span<double> out) const;

  // softmax(logits / temperature); returns log of the normalizer of
  // logits/temperature for logprob computation.
  double token_distribution(const ContextKey& ctx, double temperature,
                            std::span<double> probs_out) const;

  double token_logprob(const ContextKey& ctx, double temperature, int token) const;

  struct Sample {
    int token;
    double logprob;
  };
  Sample sample_token(const ContextKey& ctx, double temperature, Rng& rng) const;

  // grad_buffer[slot(ctx_k, j)] += logit_grad[j], for every order k.
  void accumulate_param_grad(const ContextKey& ctx, std::span<const double> logit_grad,
                             GradBuffer& grad_buffer) const;

  // Slots backing (ctx, token), one per order.
  void slots_for(const ContextKey& ctx, int token, std::vector<std::size_t>& out) const;

  // Weight slot of one order's context hash; init/inspection hook.
  std::size_t slot_for_order(std::size_t order_index, std::uint64_t ctx_hash, int token) const {
    return slot(order_index, ctx_hash, token);
  }

  double order_gain(std::size_t order_index) const { return config_.order_gains[order_index]; }

  // Adds delta to every slot backing (ctx, token); test and init hook.
  void add_weight(const ContextKey& ctx, int token, double delta);

  double& weight_at(std::size_t slot) { return weights_[slot]; }
  double weight_at(std::size_t slot) const { return weights_[slot]; }
  std::vector<double>& weights() { return weights_; }

  void apply(const GradBuffer& grad, double step_scale);

  void save_checkpoint(const std::string& path) const;
  static Policy load_checkpoint(const std::string& path);

 private:
  std::size_t slot(std::size_t order_index, std::uint64_t ctx_hash, int token) const;

  PolicyConfig config_;
  std::vector<double> weights_;
  std::size_t mask_;
};

}  // namespace simpletir
