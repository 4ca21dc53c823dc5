#include "simpletir/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace simpletir {

double prop1_norm(std::span<const double> probs, int sampled_token, double mask_weight,
                  double ratio, bool gate, double advantage) {
  double pc = probs[static_cast<std::size_t>(sampled_token)];
  double collision = 0.0;
  for (double p : probs) collision += p * p;
  double radicand = 1.0 - 2.0 * pc + collision;  // == ||onehot(c) - P||^2
  if (radicand < 0.0) radicand = 0.0;            // guard fp noise near one-hot
  return mask_weight * ratio * (gate ? 1.0 : 0.0) * std::abs(advantage) * std::sqrt(radicand);
}

namespace {

double logsumexp(std::span<const double> z) {
  double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// Contribution of a single response token to the batch objective, as a
// function of the tempered logit vector at its position.
double token_term(std::span<const double> tempered_logits, int c, double old_logprob,
                  double advantage, double weight, const ClipConfig& clip) {
  double lp = tempered_logits[static_cast<std::size_t>(c)] - logsumexp(tempered_logits);
  double ratio = importance_ratio(lp, old_logprob);
  return weight * clipped_token_objective(ratio, advantage, clip).value;
}

}  // namespace

double objective_with_logit_override(const UpdateBatch& batch, const Policy& policy,
                                     double temperature, const ClipConfig& clip,
                                     std::size_t traj_index, std::size_t response_index,
                                     std::span<const double> tempered_logits) {
  double total = 0.0;
  std::size_t kept = batch.kept_count();
  if (kept == 0) throw DegenerateBatch("no trajectories kept");
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& t = batch.trajectories[i];
    if (!t.keep) continue;
    double inv_len = 1.0 / static_cast<double>(t.live_count());
    double sum = 0.0;
    for (std::size_t r = 0; r < t.response.size(); ++r) {
      if (!t.live[r]) continue;
      const auto& tok = t.response[r];
      const int c = t.ids[tok.pos];
      double lp;
      if (i == traj_index && r == response_index) {
        lp = tempered_logits[static_cast<std::size_t>(c)] - logsumexp(tempered_logits);
      } else {
        ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), tok.pos));
        lp = policy.token_logprob(ctx, temperature, c);
      }
      double ratio = importance_ratio(lp, tok.old_logprob);
      sum += clipped_token_objective(ratio, t.advantage, clip).value;
    }
    total += sum * inv_len;
  }
  return total / static_cast<double>(kept);
}

Prop1Report verify_prop1(const Policy& policy, const UpdateBatch& batch, double temperature,
                         const ClipConfig& clip, double tol_analytic, double tol_fd,
                         std::size_t fd_samples, Rng& rng, bool keep_records) {
  Prop1Report report;
  std::size_t kept = batch.kept_count();
  if (kept == 0) throw DegenerateBatch("no trajectories kept");
  const int V = policy.vocab_size();
  std::vector<double> probs(static_cast<std::size_t>(V));
  std::vector<double> grad(static_cast<std::size_t>(V));

  struct Candidate {
    std::size_t traj, resp;
  };
  std::vector<Candidate> candidates;

  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& t = batch.trajectories[i];
    if (!t.keep) continue;
    double weight = 1.0 / (static_cast<double>(kept) * static_cast<double>(t.live_count()));
    for (std::size_t r = 0; r < t.response.size(); ++r) {
      if (!t.live[r]) continue;
      const auto& tok = t.response[r];
      const int c = t.ids[tok.pos];
      ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), tok.pos));
      policy.token_distribution(ctx, temperature, probs);
      double new_lp = std::log(probs[static_cast<std::size_t>(c)]);
      double ratio = importance_ratio(new_lp, tok.old_logprob);
      auto obj = clipped_token_objective(ratio, t.advantage, clip);

      // Analytic per-position gradient of the batch objective w.r.t. the
      // tempered logits at this position.
      double coeff = (obj.gate ? 1.0 : 0.0) * weight * t.advantage * ratio;
      double analytic_norm_sq = 0.0;
      for (int j = 0; j < V; ++j) {
        double g = coeff * ((j == c ? 1.0 : 0.0) - probs[static_cast<std::size_t>(j)]);
        grad[static_cast<std::size_t>(j)] = g;
        analytic_norm_sq += g * g;
      }
      double analytic_norm = std::sqrt(analytic_norm_sq);
      double predicted = prop1_norm(probs, c, weight, ratio, obj.gate, t.advantage);
      double err = std::abs(analytic_norm - predicted);
      report.max_analytic_error = std::max(report.max_analytic_error, err);
      ++report.tokens_checked;
      if (err > tol_analytic) {
        throw Prop1Mismatch("norm mismatch at trajectory " + std::to_string(i) + " position " +
                            std::to_string(r) + ": analytic " + std::to_string(analytic_norm) +
                            " vs predicted " + std::to_string(predicted));
      }
      candidates.push_back({i, r});
      if (keep_records) {
        TokenGradRecord rec;
        rec.trajectory = i;
        rec.position = r;
        rec.prob_of_sampled = probs[static_cast<std::size_t>(c)];
        rec.collision_mass = 0.0;
        for (double p : probs) rec.collision_mass += p * p;
        rec.ratio = ratio;
        rec.gate = obj.gate;
        rec.advantage = t.advantage;
        rec.mask_weight = weight;
        rec.predicted_norm = predicted;
        rec.analytic_norm = analytic_norm;
        report.records.push_back(rec);
      }
    }
  }

  // Finite-difference spot checks on a random token subsample.
  const double h = 1e-5;
  std::vector<double> u(static_cast<std::size_t>(V));
  std::size_t n_fd = std::min(fd_samples, candidates.size());
  for (std::size_t s = 0; s < n_fd; ++s) {
    const auto& cand = candidates[rng.next_below(candidates.size())];
    const auto& t = batch.trajectories[cand.traj];
    const auto& tok = t.response[cand.resp];
    const int c = t.ids[tok.pos];
    double weight = 1.0 / (static_cast<double>(kept) * static_cast<double>(t.live_count()));
    ContextKey ctx = policy.context(std::span<const int>(t.ids.data(), tok.pos));
    policy.logits(ctx, u);
    for (int j = 0; j < V; ++j) u[static_cast<std::size_t>(j)] /= temperature;
    policy.token_distribution(ctx, temperature, probs);
    double ratio = importance_ratio(std::log(probs[static_cast<std::size_t>(c)]), tok.old_logprob);
    auto obj = clipped_token_objective(ratio, t.advantage, clip);
    double coeff = (obj.gate ? 1.0 : 0.0) * weight * t.advantage * ratio;
    for (int j = 0; j < V; ++j) {
      double saved = u[static_cast<std::size_t>(j)];
      u[static_cast<std::size_t>(j)] = saved + h;
      double fp = token_term(u, c, tok.old_logprob, t.advantage, weight, clip);
      u[static_cast<std::size_t>(j)] = saved - h;
      double fm = token_term(u, c, tok.old_logprob, t.advantage, weight, clip);
      u[static_cast<std::size_t>(j)] = saved;
      double fd = (fp - fm) / (2.0 * h);
      double analytic = coeff * ((j == c ? 1.0 : 0.0) - probs[static_cast<std::size_t>(j)]);
      double err = std::abs(fd - analytic);
      report.max_fd_error = std::max(report.max_fd_error, err);
      if (err > tol_fd) {
        throw Prop1Mismatch("finite-difference mismatch at trajectory " +
                            std::to_string(cand.traj) + " position " + std::to_string(cand.resp) +
                            " coordinate " + std::to_string(j));
      }
    }
    ++report.fd_tokens_checked;
  }
  return report;
}

TrajectoryStats trajectory_stats(const Trajectory& trajectory) {
  TrajectoryStats s;
  double sum_lp = 0.0;
  double min_lp = 0.0;
  bool any = false;
  for (const auto& seg : trajectory.segments) {
    if (const auto* turn = std::get_if<TurnRecord>(&seg)) {
      ++s.n_turns;
      if (turn->kind == TurnKind::Void) ++s.n_void;
      if (turn->kind == TurnKind::Code) ++s.n_code;
      for (const auto& tok : turn->tokens) {
        ++s.n_response_tokens;
        sum_lp += tok.old_logprob;
        min_lp = any ? std::min(min_lp, tok.old_logprob) : tok.old_logprob;
        any = true;
      }
    } else {
      s.n_feedback_tokens += std::get<FeedbackRecord>(seg).tokens.size();
    }
  }
  s.min_token_prob = any ? std::exp(min_lp) : 1.0;
  s.mean_logprob = any ? sum_lp / static_cast<double>(s.n_response_tokens) : 0.0;
  return s;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string metrics_row_to_csv(const MetricsRow& r) {
  std::string s = std::to_string(r.step);
  for (double v : {r.mean_reward, r.mean_response_len, r.mean_turns, r.void_rate,
                   r.filtered_fraction, r.grad_norm_preclip, r.grad_norm_postclip,
                   r.min_token_prob, r.p01_token_prob, r.objective, r.clipped_fraction}) {
    s += ',';
    s += fmt(v);
  }
  return s;
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open metrics sink " + path);
  out_ << kMetricsHeader << '\n';
  out_.flush();
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << metrics_row_to_csv(row) << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("metrics sink unavailable: " + path_);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics file " + path);
  if (line != kMetricsHeader) throw std::runtime_error("bad metrics header in " + path);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 12) throw std::runtime_error("bad metrics row in " + path);
    MetricsRow r;
    r.step = static_cast<int>(vals[0]);
    r.mean_reward = vals[1];
    r.mean_response_len = vals[2];
    r.mean_turns = vals[3];
    r.void_rate = vals[4];
    r.filtered_fraction = vals[5];
    r.grad_norm_preclip = vals[6];
    r.grad_norm_postclip = vals[7];
    r.min_token_prob = vals[8];
    r.p01_token_prob = vals[9];
    r.objective = vals[10];
    r.clipped_fraction = vals[11];
    rows.push_back(r);
  }
  return rows;
}

void append_token_grad_jsonl(std::ofstream& out, int step, const TokenGradRecord& rec) {
  nlohmann::json j = {{"step", step},
                      {"traj", rec.trajectory},
                      {"pos", rec.position},
                      {"P_c", rec.prob_of_sampled},
                      {"collision", rec.collision_mass},
                      {"ratio", rec.ratio},
                      {"gate", rec.gate ? 1 : 0},
                      {"adv", rec.advantage},
                      {"predicted_norm", rec.predicted_norm},
                      {"analytic_norm", rec.analytic_norm}};
  out << j.dump() << '\n';
}

}  // namespace simpletir
