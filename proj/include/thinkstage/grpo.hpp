#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinkstage/env.hpp"
#include "thinkstage/policy.hpp"

namespace thinkstage {

struct GrpoHyperParams {
  double clip_epsilon = 0.2;
  double kl_beta = 1e-2;
  std::size_t inner_updates = 1;  // gradient steps per sampled batch
  double learning_rate = 0.05;
  double ratio_log_clamp = 20.0;  // cap on |log ratio| before exponentiating
};

void validate(const GrpoHyperParams& hp);

/// Raised when an objective or gradient intermediate stops being finite.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One sampled output. Log-probabilities are whole-sequence values under the
/// old and reference policies, fixed at sampling time.
struct Rollout {
  std::vector<Token> tokens;
  std::string text;
  double reward = 0.0;
  double logp_old = 0.0;
  double logp_ref = 0.0;
  bool format_valid = false;
  std::size_t think_len = 0;
};

struct RolloutGroup {
  Question question;
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;

  std::size_t size() const noexcept { return rollouts.size(); }
};

inline constexpr double kAdvantageStdFloor = 1e-8;

/// (r - mean) / max(population std, 1e-8); exactly zero when all rewards are
/// equal. Throws for groups smaller than two.
std::vector<double> compute_advantages(std::span<const double> rewards);

/// Fills group.advantages from the rollout rewards.
void assign_advantages(RolloutGroup& group);

/// ratio - log(ratio) - 1 with ratio = exp(logp_ref - logp_theta), |log ratio|
/// clamped at `log_clamp`.
double kl_value(double logp_theta, double logp_ref, double log_clamp = 20.0);

/// d kl_value / d logp_theta
double kl_slope(double logp_theta, double logp_ref, double log_clamp = 20.0);

/// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)
double clipped_term(double ratio, double advantage, double clip_epsilon);

/// d clipped_term / d ratio, taking the min branch at kinks and preferring
/// the unclipped branch on ties.
double clipped_slope(double ratio, double advantage, double clip_epsilon);

/// Sequence-level log-probabilities of every rollout under `policy`.
std::vector<double> current_logprobs(const RolloutGroup& group, const TabularPolicy& policy);

/// (1/G) sum_i clipped_term(ratio_i, A_i) - beta (1/G) sum_i kl_i, with
/// ratio_i = exp(logp_theta_i - logp_old_i).
double group_objective(const RolloutGroup& group, const TabularPolicy& current, const GrpoHyperParams& hp);
double group_objective(const RolloutGroup& group, std::span<const double> logp_theta, const GrpoHyperParams& hp);

/// dJ/dlogp_theta_i for each rollout; the full gradient is
/// sum_i w_i * grad logp_theta(o_i).
std::vector<double> rollout_weights(const RolloutGroup& group, std::span<const double> logp_theta,
                                    const GrpoHyperParams& hp);

/// Exact gradient of group_objective with respect to the current logits,
/// dense with the policy's logits layout.
std::vector<double> objective_gradient(const RolloutGroup& group, const TabularPolicy& current,
                                       const GrpoHyperParams& hp);

}  // namespace thinkstage
