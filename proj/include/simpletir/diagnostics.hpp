#pragma once

#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpletir/grpo.hpp"

namespace simpletir {

// Predicted L2 norm of the per-position logit gradient:
//   weight * ratio * gate * |advantage| * sqrt(1 - 2 P(c) + sum_j P(j)^2).
// The radical equals ||onehot(c) - P||, which is how it is evaluated.
double prop1_norm(std::span<const double> probs, int sampled_token, double mask_weight,
                  double ratio, bool gate, double advantage);

struct TokenGradRecord {
  std::size_t trajectory = 0;
  std::size_t position = 0;       // response-token index
  double prob_of_sampled = 0.0;
  double collision_mass = 0.0;    // sum_j P(j)^2
  double ratio = 0.0;
  bool gate = false;
  double advantage = 0.0;
  double mask_weight = 0.0;       // token weight in the batch objective
  double predicted_norm = 0.0;
  double analytic_norm = 0.0;
};

struct Prop1Mismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Prop1Report {
  std::size_t tokens_checked = 0;
  double max_analytic_error = 0.0;   // analytic vs formula
  std::size_t fd_tokens_checked = 0;
  double max_fd_error = 0.0;         // finite differences vs analytic
  std::vector<TokenGradRecord> records;
};

// For every kept live token, confirms that the analytic per-position logit
// gradient of the batch objective has the norm predicted by the formula
// above (within tol_analytic), and checks at least fd_samples tokens against
// central finite differences on injected logit overrides (within tol_fd).
// Throws Prop1Mismatch on any violation.
Prop1Report verify_prop1(const Policy& policy, const UpdateBatch& batch, double temperature,
                         const ClipConfig& clip, double tol_analytic, double tol_fd,
                         std::size_t fd_samples, Rng& rng, bool keep_records = false);

// Batch objective with the tempered logits of one position replaced by an
// explicit vector; the finite-difference route of the Prop. 1 check.
double objective_with_logit_override(const UpdateBatch& batch, const Policy& policy,
                                     double temperature, const ClipConfig& clip,
                                     std::size_t traj_index, std::size_t response_index,
                                     std::span<const double> tempered_logits);

struct TrajectoryStats {
  double min_token_prob = 1.0;
  double mean_logprob = 0.0;
  int n_turns = 0;
  int n_void = 0;
  int n_code = 0;
  std::size_t n_feedback_tokens = 0;
  std::size_t n_response_tokens = 0;
};

TrajectoryStats trajectory_stats(const Trajectory& trajectory);

struct MetricsRow {
  int step = 0;
  double mean_reward = 0.0;
  double mean_response_len = 0.0;
  double mean_turns = 0.0;
  double void_rate = 0.0;
  double filtered_fraction = 0.0;
  double grad_norm_preclip = 0.0;
  double grad_norm_postclip = 0.0;
  double min_token_prob = 0.0;
  double p01_token_prob = 0.0;
  double objective = 0.0;
  double clipped_fraction = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "step,mean_reward,mean_response_len,mean_turns,void_rate,filtered_fraction,"
    "grad_norm_preclip,grad_norm_postclip,min_token_prob,p01_token_prob,objective,"
    "clipped_fraction";

// Append-only CSV sink, header written on open, flushed per row.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

std::string metrics_row_to_csv(const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// Optional per-token gradient log, one JSON object per line.
void append_token_grad_jsonl(std::ofstream& out, int step, const TokenGradRecord& rec);

}  // namespace simpletir
