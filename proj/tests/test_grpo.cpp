#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "simpletir/grpo.hpp"

using namespace simpletir;

TEST_CASE("advantages: degenerate, worked example, zero sum") {
  std::vector<double> ones{1, 1, 1, 1};
  for (double a : compute_advantages(ones, 1e-6)) CHECK(a == 0.0);

  std::vector<double> r{1, 1, 0, 0};
  auto adv = compute_advantages(r, 1e-6);
  CHECK(adv[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adv[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adv[2] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(adv[3] == doctest::Approx(-1.0).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> rewards;
    for (int i = 0; i < 8; ++i) rewards.push_back(rng.next_below(2) ? 1.0 : 0.0);
    auto a = compute_advantages(rewards, 1e-6);
    double sum = std::accumulate(a.begin(), a.end(), 0.0);
    CHECK(std::abs(sum) <= 1e-9);
  }
}

TEST_CASE("advantages: shift and positive-scale invariance") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> rewards;
    for (int i = 0; i < 6; ++i) rewards.push_back(rng.next_gaussian());
    auto base = compute_advantages(rewards, 1e-9);
    double shift = rng.next_gaussian();
    double scale = 0.1 + 3.0 * rng.next_double();
    std::vector<double> moved;
    for (double r : rewards) moved.push_back(scale * r + shift);
    auto other = compute_advantages(moved, 1e-9);
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(other[i] == doctest::Approx(base[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("importance ratio") {
  CHECK(importance_ratio(-1.5, -1.5) == 1.0);
  CHECK(importance_ratio(-1.0, -1.0 - std::log(2.0)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(importance_ratio(-10.0, -12.0) == doctest::Approx(std::exp(2.0)).epsilon(1e-12));
  bool clamped = false;
  double big = importance_ratio(0.0, -200.0, &clamped);
  CHECK(clamped);
  CHECK(big == doctest::Approx(std::exp(50.0)).epsilon(1e-12));
}

TEST_CASE("clipped token objective worked examples") {
  ClipConfig clip;  // 0.2 / 0.28
  auto on_policy = clipped_token_objective(1.0, 0.7, clip);
  CHECK(on_policy.value == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(on_policy.gate);

  auto neg = clipped_token_objective(2.0, -1.0, clip);
  CHECK(neg.value == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(neg.gate);  // negative advantage, ratio unbounded above

  auto pos = clipped_token_objective(2.0, 1.0, clip);
  CHECK(pos.value == doctest::Approx(1.28).epsilon(1e-15));
  CHECK_FALSE(pos.gate);

  CHECK_FALSE(clipped_token_objective(1.0, 0.0, clip).gate);
  // Boundary counts as unclipped.
  CHECK(clipped_token_objective(1.28, 1.0, clip).gate);
  CHECK(clipped_token_objective(0.8, -1.0, clip).gate);
}

TEST_CASE("on-policy identity: objective equals mean kept advantage") {
  auto fx = testutil::make_batch(7, /*perturb=*/0.0);
  ClipConfig clip;
  double expected = 0.0;
  std::size_t kept = 0;
  for (const auto& t : fx.batch.trajectories) {
    if (t.keep && t.live_count() > 0) {
      expected += t.advantage;
      ++kept;
    }
  }
  REQUIRE(kept > 0);
  expected /= static_cast<double>(kept);
  double obj = batch_objective(fx.batch, fx.policy, 1.0, clip);
  CHECK(obj == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("masking and filtering invariance is exact") {
  auto fx = testutil::make_batch(9, /*perturb=*/0.02);
  ClipConfig clip;
  // Kill one token and one trajectory.
  REQUIRE(fx.batch.trajectories.size() >= 2);
  auto& t0 = fx.batch.trajectories[0];
  REQUIRE(t0.response.size() >= 2);
  t0.live[1] = 0;
  fx.batch.trajectories[1].keep = 0;

  GradBuffer g1(fx.policy.capacity()), g2(fx.policy.capacity());
  double obj1 = batch_objective(fx.batch, fx.policy, 1.0, clip);
  batch_gradient(fx.batch, fx.policy, 1.0, clip, g1);

  // Perturb only dead material: a masked token's logprob and the whole
  // dropped trajectory.
  t0.response[1].old_logprob -= 7.5;
  auto& dropped = fx.batch.trajectories[1];
  dropped.advantage = 1e9;
  for (auto& r : dropped.response) r.old_logprob = -42.0;

  double obj2 = batch_objective(fx.batch, fx.policy, 1.0, clip);
  batch_gradient(fx.batch, fx.policy, 1.0, clip, g2);
  CHECK(obj1 == obj2);  // exactly
  CHECK(g1.touched().size() == g2.touched().size());
  for (std::size_t s : g1.touched()) CHECK(g1.at(s) == g2.at(s));
}

TEST_CASE("degenerate batches are rejected") {
  auto fx = testutil::make_batch(10, 0.0);
  ClipConfig clip;
  for (auto& t : fx.batch.trajectories) t.keep = 0;
  CHECK_THROWS_AS(batch_objective(fx.batch, fx.policy, 1.0, clip), DegenerateBatch);
  GradBuffer g(fx.policy.capacity());
  CHECK_THROWS_AS(batch_gradient(fx.batch, fx.policy, 1.0, clip, g), DegenerateBatch);
}

TEST_CASE("zero advantages give a zero gradient") {
  auto fx = testutil::make_batch(11, 0.01, /*synth_advantages=*/false);
  for (auto& t : fx.batch.trajectories) t.advantage = 0.0;
  ClipConfig clip;
  GradBuffer g(fx.policy.capacity());
  UpdateReport rep = batch_gradient(fx.batch, fx.policy, 1.0, clip, g);
  CHECK(rep.grad_norm_preclip == 0.0);
  for (std::size_t s : g.touched()) CHECK(g.at(s) == 0.0);
}

TEST_CASE("analytic gradient matches finite differences") {
  auto fx = testutil::make_batch(13, 0.01);
  ClipConfig clip;
  GradBuffer g(fx.policy.capacity());
  batch_gradient(fx.batch, fx.policy, 1.0, clip, g);

  Rng rng(99);
  const double h = 1e-5;
  const auto& touched = g.touched();
  REQUIRE(touched.size() > 10);
  for (int dir = 0; dir < 12; ++dir) {
    // Sparse random direction over touched slots.
    std::vector<std::pair<std::size_t, double>> d;
    double analytic = 0.0;
    for (std::size_t s : touched) {
      if (rng.next_below(4) != 0) continue;
      double c = rng.next_gaussian();
      d.push_back({s, c});
      analytic += c * g.at(s);
    }
    for (auto& [s, c] : d) fx.policy.weight_at(s) += h * c;
    double up = batch_objective(fx.batch, fx.policy, 1.0, clip);
    for (auto& [s, c] : d) fx.policy.weight_at(s) -= 2 * h * c;
    double down = batch_objective(fx.batch, fx.policy, 1.0, clip);
    for (auto& [s, c] : d) fx.policy.weight_at(s) += h * c;
    double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - analytic) <= 1e-6 * std::max(1.0, std::abs(analytic)));
  }
}

TEST_CASE("apply_update clips by global norm") {
  PolicyConfig pc;
  pc.context_orders = {2};
  pc.vocab_size = 4;
  pc.capacity_log2 = 10;
  Policy p(pc);
  ClipConfig clip;
  clip.learning_rate = 1.0;
  clip.grad_clip_norm = 1.0;

  GradBuffer small(p.capacity());
  small.add(3, 0.3);
  small.add(5, 0.4);  // norm 0.5
  UpdateReport rep;
  rep.grad_norm_preclip = small.l2_norm();
  apply_update(p, small, clip, rep);
  CHECK(rep.grad_norm_postclip == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.weight_at(3) == doctest::Approx(0.3).epsilon(1e-12));

  Policy q(pc);
  GradBuffer big(q.capacity());
  big.add(3, 4.0);  // norm 4 -> scaled by 0.25
  UpdateReport rep2;
  rep2.grad_norm_preclip = big.l2_norm();
  apply_update(q, big, clip, rep2);
  CHECK(rep2.grad_norm_postclip == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.weight_at(3) == doctest::Approx(1.0).epsilon(1e-12));

  Policy r(pc);
  GradBuffer bad(r.capacity());
  bad.add(1, std::numeric_limits<double>::quiet_NaN());
  UpdateReport rep3;
  CHECK_THROWS_AS(apply_update(r, bad, clip, rep3), NonFiniteGradient);
  CHECK(r.weight_at(1) == 0.0);
}
