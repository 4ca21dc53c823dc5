#include "simpletir/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace simpletir {

std::vector<double> compute_advantages(std::span<const double> rewards, double epsilon) {
  const std::size_t n = rewards.size();
  if (n < 2) throw std::invalid_argument("group must have at least 2 rewards");
  double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);  // population variance
  double std_dev = std::sqrt(var);
  std::vector<double> adv(n, 0.0);
  if (std_dev == 0.0) return adv;  // degenerate group: zero advantage
  double denom = std::max(std_dev, epsilon);
  for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

double importance_ratio(double new_logprob, double old_logprob, bool* clamped) {
  if (!std::isfinite(new_logprob) || !std::isfinite(old_logprob)) {
    throw std::invalid_argument("log probabilities must be finite");
  }
  double e = new_logprob - old_logprob;
  bool clamp = e > 50.0 || e < -50.0;
  if (clamped) *clamped = clamp;
  return std::exp(std::clamp(e, -50.0, 50.0));
}

TokenObjective clipped_token_objective(double ratio, double advantage, const ClipConfig& clip) {
  if (ratio < 0.0) throw std::invalid_argument("ratio must be nonnegative");
  double lo = 1.0 - clip.eps_low;
  double hi = 1.0 + clip.eps_high;
  double clipped = std::clamp(ratio, lo, hi);
  double value = std::min(ratio * advantage, clipped * advantage);
  bool gate;
  if (advantage > 0.0) {
    gate = ratio <= hi;  // boundary counts as unclipped
  } else if (advantage < 0.0) {
    gate = ratio >= lo;
  } else {
    gate = false;
  }
  return {value, gate};
}

std::size_t FlatTrajectory::live_count() const {
  std::size_t n = 0;
  for (auto b : live) n += b;
  return n;
}

std::size_t UpdateBatch::kept_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.keep;
  return n;
}

FlatTrajectory flatten_trajectory(const Trajectory& t, const Vocabulary& vocab) {
  FlatTrajectory f;
  f.ids = vocab.tokenize(t.prompt);
  f.prompt_len = f.ids.size();
  f.reward = t.reward;
  f.void_turns = t.void_turn_count();
  for (const auto& seg : t.segments) {
    if (const auto* turn = std::get_if<TurnRecord>(&seg)) {
      for (const auto& tok : turn->tokens) {
        f.response.push_back({f.ids.size(), tok.old_logprob});
        f.ids.push_back(tok.id);
      }
    } else {
      for (const auto& tok : std::get<FeedbackRecord>(seg).tokens) {
        f.ids.push_back(tok.id);
      }
    }
  }
  f.live.assign(f.response.size(), 1);
  return f;
}

UpdateBatch build_update_batch(const std::vector<GroupBatch>& groups, const Vocabulary& vocab) {
  UpdateBatch batch;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      FlatTrajectory f = flatten_trajectory(g.trajectories[i], vocab);
      f.advantage = i < g.advantages.size() ? g.advantages[i] : 0.0;
      f.keep = i < g.keep.size() ? g.keep[i] : 1;
      batch.trajectories.push_back(std::move(f));
    }
  }
  return batch;
}

namespace {

void check_batch(const UpdateBatch& batch) {
  std::size_t kept = batch.kept_count();
  if (kept == 0) throw DegenerateBatch("no trajectories kept");
  for (const auto& t : batch.trajectories) {
    if (t.keep && t.live_count() == 0) {
      throw DegenerateBatch("kept trajectory with zero live tokens");
    }
  }
}

}  // namespace

double batch_objective(const UpdateBatch& batch, const Policy& policy, double temperature,
                       const ClipConfig& clip) {
  check_batch(batch);
  double total = 0.0;
  std::size_t kept = 0;
  for (const auto& t : batch.trajectories) {
    if (!t.keep) continue;
    ++kept;
    double sum = 0.0;
    std::size_t live = 0;
    for (std::size_t r = 0; r < t.response.size(); ++r) {
      if (!t.live[r]) continue;
      ++live;
      const auto& tok = t.response[r];
      ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), tok.pos));
      double new_lp = policy.token_logprob(ctx, temperature, t.ids[tok.pos]);
      double ratio = importance_ratio(new_lp, tok.old_logprob);
      sum += clipped_token_objective(ratio, t.advantage, clip).value;
    }
    total += sum / static_cast<double>(live);
  }
  return total / static_cast<double>(kept);
}

UpdateReport batch_gradient(const UpdateBatch& batch, const Policy& policy, double temperature,
                            const ClipConfig& clip, GradBuffer& grad) {
  check_batch(batch);
  grad.clear();
  UpdateReport report;
  report.trajectories_kept = batch.kept_count();
  const int V = policy.vocab_size();
  std::vector<double> probs(static_cast<std::size_t>(V));
  std::vector<double> logit_grad(static_cast<std::size_t>(V));
  double total = 0.0;
  std::size_t clipped_tokens = 0;
  const double inv_kept = 1.0 / static_cast<double>(report.trajectories_kept);

  for (const auto& t : batch.trajectories) {
    if (!t.keep) continue;
    const double inv_len = 1.0 / static_cast<double>(t.live_count());
    double sum = 0.0;
    for (std::size_t r = 0; r < t.response.size(); ++r) {
      if (!t.live[r]) continue;
      const auto& tok = t.response[r];
      const int c = t.ids[tok.pos];
      ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), tok.pos));
      policy.token_distribution(ctx, temperature, probs);
      double new_lp = std::log(probs[static_cast<std::size_t>(c)]);
      bool clamped = false;
      double ratio = importance_ratio(new_lp, tok.old_logprob, &clamped);
      if (clamped) ++report.ratio_clamp_count;
      auto obj = clipped_token_objective(ratio, t.advantage, clip);
      sum += obj.value;
      ++report.tokens_used;
      if (!obj.gate) {
        if (t.advantage != 0.0) ++clipped_tokens;
        continue;
      }
      // d value / d logits = coeff * (onehot(c) - P); temperature enters the
      // parameter chain rule as 1/T.
      double coeff = inv_kept * inv_len * t.advantage * ratio / temperature;
      if (coeff == 0.0) continue;
      for (int j = 0; j < V; ++j) logit_grad[static_cast<std::size_t>(j)] = -coeff * probs[static_cast<std::size_t>(j)];
      logit_grad[static_cast<std::size_t>(c)] += coeff;
      policy.accumulate_param_grad(ctx, logit_grad, grad);
    }
    total += sum * inv_len;
  }
  report.objective_value = total * inv_kept;
  report.grad_norm_preclip = grad.l2_norm();
  report.clipped_token_fraction =
      report.tokens_used ? static_cast<double>(clipped_tokens) / static_cast<double>(report.tokens_used)
                         : 0.0;
  return report;
}

void apply_update(Policy& policy, GradBuffer& grad, const ClipConfig& clip,
                  UpdateReport& report) {
  if (!grad.all_finite()) throw NonFiniteGradient("gradient contains non-finite entries");
  double norm = grad.l2_norm();
  double scale = 1.0;
  if (norm > clip.grad_clip_norm && norm > 0.0) scale = clip.grad_clip_norm / norm;
  report.grad_norm_postclip = norm * scale;
  policy.apply(grad, clip.learning_rate * scale);
}

}  // namespace simpletir
