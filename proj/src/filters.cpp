#include "simpletir/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace simpletir {

FilterDecision identity_decision(const UpdateBatch& batch) {
  FilterDecision d;
  d.keep.assign(batch.trajectories.size(), 1);
  d.token_live.reserve(batch.trajectories.size());
  for (const auto& t : batch.trajectories) {
    d.token_live.emplace_back(t.response.size(), 1);
  }
  return d;
}

FilterDecision simpletir_filter(const UpdateBatch& batch) {
  FilterDecision d = identity_decision(batch);
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    if (batch.trajectories[i].void_turns > 0) {
      d.keep[i] = 0;
      ++d.stats.filtered_trajectories;
      ++d.stats.reasons["void_turn"];
    }
  }
  return d;
}

FilterDecision low_prob_token_filter(const UpdateBatch& batch, double quantile) {
  if (quantile <= 0.0 || quantile >= 1.0) throw std::invalid_argument("quantile must be in (0,1)");
  FilterDecision d = identity_decision(batch);
  struct Ref {
    double logprob;
    std::size_t traj, tok;
  };
  std::vector<Ref> refs;
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& t = batch.trajectories[i];
    for (std::size_t r = 0; r < t.response.size(); ++r) {
      refs.push_back({t.response[r].old_logprob, i, r});
    }
  }
  std::size_t k = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(refs.size()) + 1e-12));
  if (k == 0) return d;
  // Ties broken by position: earlier tokens are masked first.
  std::stable_sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
    if (a.logprob != b.logprob) return a.logprob < b.logprob;
    if (a.traj != b.traj) return a.traj < b.traj;
    return a.tok < b.tok;
  });
  for (std::size_t i = 0; i < k && i < refs.size(); ++i) {
    d.token_live[refs[i].traj][refs[i].tok] = 0;
    ++d.stats.masked_tokens;
  }
  if (d.stats.masked_tokens) d.stats.reasons["low_prob_token"] = d.stats.masked_tokens;
  return d;
}

FilterDecision high_ratio_token_filter(const UpdateBatch& batch, const Policy& policy,
                                       double temperature, double threshold) {
  if (threshold <= 1.0) throw std::invalid_argument("threshold must exceed 1");
  FilterDecision d = identity_decision(batch);
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& t = batch.trajectories[i];
    for (std::size_t r = 0; r < t.response.size(); ++r) {
      const auto& tok = t.response[r];
      ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), tok.pos));
      double new_lp = policy.token_logprob(ctx, temperature, t.ids[tok.pos]);
      if (importance_ratio(new_lp, tok.old_logprob) > threshold) {
        d.token_live[i][r] = 0;
        ++d.stats.masked_tokens;
      }
    }
  }
  if (d.stats.masked_tokens) d.stats.reasons["high_ratio_token"] = d.stats.masked_tokens;
  return d;
}

FilterDecision stop_without_filter(const UpdateBatch& batch) {
  return identity_decision(batch);
}

FilterDecision compose(const FilterDecision& a, const FilterDecision& b) {
  FilterDecision d;
  d.keep.resize(a.keep.size());
  for (std::size_t i = 0; i < a.keep.size(); ++i) d.keep[i] = a.keep[i] & b.keep[i];
  d.token_live.resize(a.token_live.size());
  for (std::size_t i = 0; i < a.token_live.size(); ++i) {
    d.token_live[i].resize(a.token_live[i].size());
    for (std::size_t r = 0; r < a.token_live[i].size(); ++r) {
      d.token_live[i][r] = a.token_live[i][r] & b.token_live[i][r];
    }
  }
  d.stats.filtered_trajectories =
      a.stats.filtered_trajectories + b.stats.filtered_trajectories;
  d.stats.masked_tokens = a.stats.masked_tokens + b.stats.masked_tokens;
  d.stats.reasons = a.stats.reasons;
  for (const auto& [k, v] : b.stats.reasons) d.stats.reasons[k] += v;
  return d;
}

FilterDecision apply_filter_strategy(const std::string& strategy, const UpdateBatch& batch,
                                     const Policy& policy, double temperature,
                                     const FilterOptions& options) {
  FilterDecision d = identity_decision(batch);
  std::stringstream ss(strategy);
  std::string name;
  bool any = false;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    any = true;
    if (name == "simpletir") {
      d = compose(d, simpletir_filter(batch));
    } else if (name == "low_prob") {
      d = compose(d, low_prob_token_filter(batch, options.low_prob_quantile));
    } else if (name == "high_ratio") {
      d = compose(d, high_ratio_token_filter(batch, policy, temperature,
                                             options.high_ratio_threshold));
    } else if (name == "none") {
      d = compose(d, stop_without_filter(batch));
    } else {
      throw std::invalid_argument("unknown filter strategy: " + name);
    }
  }
  if (!any) throw std::invalid_argument("empty filter strategy");
  return d;
}

void apply_decision(UpdateBatch& batch, const FilterDecision& decision) {
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    batch.trajectories[i].keep = decision.keep[i];
    batch.trajectories[i].live = decision.token_live[i];
  }
}

}  // namespace simpletir
