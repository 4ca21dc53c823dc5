#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "simpletir/policy.hpp"
#include "simpletir/rng.hpp"

using namespace simpletir;

namespace {

PolicyConfig base_config(int vocab_size = 8) {
  PolicyConfig pc;
  pc.context_orders = {2, 4};
  pc.vocab_size = vocab_size;
  pc.capacity_log2 = 12;
  return pc;
}

std::vector<int> ids(std::initializer_list<int> l) { return l; }

}  // namespace

TEST_CASE("fresh policy has zero logits and uniform distribution") {
  Policy p(base_config());
  const int V = p.vocab_size();
  ContextKey ctx = p.context(ids({1, 2, 3}));
  std::vector<double> z(V), probs(V);
  p.logits(ctx, z);
  for (double v : z) CHECK(v == 0.0);
  p.token_distribution(ctx, 1.0, probs);
  for (double v : probs) CHECK(v == doctest::Approx(1.0 / V).epsilon(1e-12));
}

TEST_CASE("add_weight shows up in logits exactly") {
  Policy p(base_config());
  ContextKey ctx = p.context(ids({1, 2, 3}));
  p.add_weight(ctx, 3, 2.0);
  std::vector<double> z(p.vocab_size());
  p.logits(ctx, z);
  CHECK(z[3] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("distributions normalize for random params") {
  Policy p(base_config());
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> prefix;
    for (int k = 0; k < 6; ++k) prefix.push_back(static_cast<int>(rng.next_below(8)));
    ContextKey ctx = p.context(prefix);
    for (int j = 0; j < p.vocab_size(); ++j) p.add_weight(ctx, j, rng.next_gaussian());
    std::vector<double> probs(p.vocab_size());
    p.token_distribution(ctx, 0.7, probs);
    double sum = 0.0;
    for (double v : probs) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax shift invariance") {
  Policy p(base_config());
  ContextKey ctx = p.context(ids({4, 5}));
  Rng rng(11);
  for (int j = 0; j < p.vocab_size(); ++j) p.add_weight(ctx, j, rng.next_gaussian());
  std::vector<double> before(p.vocab_size()), after(p.vocab_size());
  p.token_distribution(ctx, 1.0, before);
  for (int j = 0; j < p.vocab_size(); ++j) p.add_weight(ctx, j, 3.25);
  p.token_distribution(ctx, 1.0, after);
  for (int j = 0; j < p.vocab_size(); ++j) {
    CHECK(after[j] == doctest::Approx(before[j]).epsilon(1e-12));
  }
}

TEST_CASE("temperature equals logit scaling") {
  Policy p(base_config());
  ContextKey ctx = p.context(ids({0, 1, 2}));
  Rng rng(13);
  std::vector<double> w(p.vocab_size());
  for (int j = 0; j < p.vocab_size(); ++j) {
    w[j] = rng.next_gaussian();
    p.add_weight(ctx, j, w[j]);
  }
  const double T = 0.37;
  std::vector<double> tempered(p.vocab_size());
  p.token_distribution(ctx, T, tempered);

  Policy scaled(base_config());
  for (int j = 0; j < p.vocab_size(); ++j) scaled.add_weight(ctx, j, w[j] / T);
  std::vector<double> direct(p.vocab_size());
  scaled.token_distribution(ctx, 1.0, direct);
  for (int j = 0; j < p.vocab_size(); ++j) {
    CHECK(tempered[j] == doctest::Approx(direct[j]).epsilon(1e-12));
  }
}

TEST_CASE("token_logprob matches the distribution") {
  Policy p(base_config());
  ContextKey ctx = p.context(ids({7, 6, 5}));
  Rng rng(17);
  for (int j = 0; j < p.vocab_size(); ++j) p.add_weight(ctx, j, rng.next_gaussian());
  std::vector<double> probs(p.vocab_size());
  p.token_distribution(ctx, 1.3, probs);
  for (int j = 0; j < p.vocab_size(); ++j) {
    CHECK(p.token_logprob(ctx, 1.3, j) == doctest::Approx(std::log(probs[j])).epsilon(1e-12));
  }
}

TEST_CASE("one-hot sampling and determinism") {
  Policy p(base_config());
  ContextKey ctx = p.context(ids({2, 2}));
  p.add_weight(ctx, 5, 60.0);  // effectively one-hot
  Rng rng(21);
  for (int i = 0; i < 20; ++i) {
    auto s = p.sample_token(ctx, 1.0, rng);
    CHECK(s.token == 5);
    CHECK(s.logprob == doctest::Approx(0.0).epsilon(1e-9));
  }
  Rng a(33), b(33);
  for (int i = 0; i < 100; ++i) {
    CHECK(p.sample_token(ctx, 2.0, a).token == p.sample_token(ctx, 2.0, b).token);
  }
}

TEST_CASE("sampling frequencies match the distribution within 3 sigma") {
  Policy p(base_config());
  ContextKey ctx = p.context(ids({3, 1, 4}));
  Rng wrng(25);
  for (int j = 0; j < p.vocab_size(); ++j) p.add_weight(ctx, j, wrng.next_gaussian());
  std::vector<double> probs(p.vocab_size());
  p.token_distribution(ctx, 1.0, probs);
  const int N = 100000;
  std::vector<int> counts(p.vocab_size(), 0);
  Rng rng(26);
  for (int i = 0; i < N; ++i) ++counts[p.sample_token(ctx, 1.0, rng).token];
  for (int j = 0; j < p.vocab_size(); ++j) {
    double mean = N * probs[j];
    double sigma = std::sqrt(N * probs[j] * (1.0 - probs[j]));
    CHECK(std::abs(counts[j] - mean) <= 3.0 * sigma + 1.0);
  }
}

TEST_CASE("gradient accumulation is linear over orders") {
  Policy p(base_config());
  ContextKey ctx = p.context(ids({1, 2, 3, 4}));
  GradBuffer grad(p.capacity());
  std::vector<double> g(p.vocab_size(), 0.0);
  g[2] = 1.5;
  g[6] = -0.25;
  p.accumulate_param_grad(ctx, g, grad);
  p.accumulate_param_grad(ctx, g, grad);  // accumulates
  std::vector<std::size_t> slots;
  p.slots_for(ctx, 2, slots);
  double total = 0.0;
  for (std::size_t s : slots) total += grad.at(s);
  CHECK(total == doctest::Approx(2 * 1.5 * slots.size()).epsilon(1e-12));

  GradBuffer zero(p.capacity());
  std::vector<double> zg(p.vocab_size(), 0.0);
  p.accumulate_param_grad(ctx, zg, zero);
  CHECK(zero.touched().empty());
}

TEST_CASE("per-order gains scale logits and gradients consistently") {
  PolicyConfig pc = base_config();
  pc.order_gains = {2.0, 0.5};
  Policy p(pc);
  ContextKey ctx = p.context(ids({5, 5, 5}));

  // add_weight still moves the logit by exactly delta.
  p.add_weight(ctx, 1, 1.75);
  std::vector<double> z(p.vocab_size());
  p.logits(ctx, z);
  CHECK(z[1] == doctest::Approx(1.75).epsilon(1e-12));

  // A raw slot write at order k shows up as gain_k * w.
  std::size_t slot0 = p.slot_for_order(0, ctx.order_hashes[0], 2);
  p.weight_at(slot0) += 3.0;
  p.logits(ctx, z);
  CHECK(z[2] == doctest::Approx(2.0 * 3.0).epsilon(1e-12));

  // Parameter gradient picks up the per-order gain.
  GradBuffer grad(p.capacity());
  std::vector<double> g(p.vocab_size(), 0.0);
  g[2] = 1.0;
  p.accumulate_param_grad(ctx, g, grad);
  CHECK(grad.at(p.slot_for_order(0, ctx.order_hashes[0], 2)) == doctest::Approx(2.0));
  CHECK(grad.at(p.slot_for_order(1, ctx.order_hashes[1], 2)) == doctest::Approx(0.5));
}

TEST_CASE("context keys pad with the begin marker") {
  Policy p(base_config());
  // A prefix shorter than the largest order still yields a valid, stable key.
  ContextKey empty = p.context(ids({}));
  ContextKey one = p.context(ids({3}));
  CHECK(empty.order_hashes.size() == 2);
  CHECK(empty == p.context(ids({})));
  CHECK_FALSE(empty == one);
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  fs::create_directories("test_out");
  PolicyConfig pc = base_config(12);
  pc.order_gains = {1.0, 2.5};
  Policy p(pc);
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    p.weight_at(rng.next_below(p.capacity())) = rng.next_gaussian();
  }
  std::string path = "test_out/policy_ckpt.json";
  p.save_checkpoint(path);
  Policy back = Policy::load_checkpoint(path);
  CHECK(back.vocab_size() == p.vocab_size());
  CHECK(back.config().order_gains == pc.order_gains);
  Rng ctxs(32);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> prefix;
    for (int k = 0; k < 5; ++k) prefix.push_back(static_cast<int>(ctxs.next_below(12)));
    ContextKey ctx = p.context(prefix);
    std::vector<double> za(p.vocab_size()), zb(p.vocab_size());
    p.logits(ctx, za);
    back.logits(ctx, zb);
    for (int j = 0; j < p.vocab_size(); ++j) CHECK(za[j] == zb[j]);
  }
}
