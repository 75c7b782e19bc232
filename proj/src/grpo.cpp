#include "thinkstage/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace thinkstage {

void validate(const GrpoHyperParams& hp) {
  if (!(hp.clip_epsilon > 0.0 && hp.clip_epsilon < 1.0)) throw std::invalid_argument("clip_epsilon must be in (0,1)");
  if (!(hp.kl_beta >= 0.0)) throw std::invalid_argument("kl_beta must be >= 0");
  if (hp.inner_updates == 0) throw std::invalid_argument("inner_updates must be positive");
  if (!(hp.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(hp.ratio_log_clamp > 0.0)) throw std::invalid_argument("ratio_log_clamp must be positive");
}

std::vector<double> compute_advantages(std::span<const double> rewards) {
  const std::size_t n = rewards.size();
  if (n < 2) throw std::invalid_argument("advantage group needs at least two rollouts");
  std::vector<double> adv(n, 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return adv;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::max(std::sqrt(var / static_cast<double>(n)), kAdvantageStdFloor);
  for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

void assign_advantages(RolloutGroup& group) {
  std::vector<double> rewards;
  rewards.reserve(group.size());
  for (const auto& r : group.rollouts) rewards.push_back(r.reward);
  group.advantages = compute_advantages(rewards);
}

namespace {

double clamp_log(double d, double c) { return std::clamp(d, -c, c); }

// e^d - d - 1 without cancellation near zero.
double excess_exp(double d) {
  if (std::fabs(d) < 1e-4) return d * d * (0.5 + d * (1.0 / 6.0 + d * (1.0 / 24.0 + d / 120.0)));
  return std::expm1(d) - d;
}

}  // namespace

double kl_value(double logp_theta, double logp_ref, double log_clamp) {
  return std::max(0.0, excess_exp(clamp_log(logp_ref - logp_theta, log_clamp)));
}

double kl_slope(double logp_theta, double logp_ref, double log_clamp) {
  const double d = logp_ref - logp_theta;
  if (std::fabs(d) > log_clamp) return 0.0;
  // d/dlogp_theta of (e^d - d - 1) with d = logp_ref - logp_theta.
  return -std::expm1(d);
}

double clipped_term(double ratio, double advantage, double clip_epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_slope(double ratio, double advantage, double clip_epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  if (ratio * advantage <= clipped * advantage) return advantage;
  // Clipped branch is the minimum, so the ratio is outside the band.
  return 0.0;
}

std::vector<double> current_logprobs(const RolloutGroup& group, const TabularPolicy& policy) {
  std::vector<double> out;
  out.reserve(group.size());
  for (const auto& r : group.rollouts) out.push_back(seq_logprob(policy, group.question.key, r.tokens));
  return out;
}

namespace {

[[noreturn]] void fault(const char* what, std::size_t i, double value) {
  std::ostringstream os;
  os << "non-finite " << what << " at rollout " << i << ": " << value;
  throw NumericFault(os.str());
}

void check_group(const RolloutGroup& group, std::span<const double> logp_theta) {
  if (group.advantages.size() != group.size() || logp_theta.size() != group.size())
    throw std::invalid_argument("group advantages or log-probabilities do not match rollout count");
  if (group.size() < 2) throw std::invalid_argument("group needs at least two rollouts");
}

}  // namespace

double group_objective(const RolloutGroup& group, std::span<const double> logp_theta, const GrpoHyperParams& hp) {
  check_group(group, logp_theta);
  double surrogate = 0.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& r = group.rollouts[i];
    const double ratio = std::exp(clamp_log(logp_theta[i] - r.logp_old, hp.ratio_log_clamp));
    const double term = clipped_term(ratio, group.advantages[i], hp.clip_epsilon);
    const double k = kl_value(logp_theta[i], r.logp_ref, hp.ratio_log_clamp);
    if (!std::isfinite(term)) fault("surrogate term", i, term);
    if (!std::isfinite(k)) fault("kl term", i, k);
    surrogate += term;
    kl += k;
  }
  const double g = static_cast<double>(group.size());
  return surrogate / g - hp.kl_beta * kl / g;
}

double group_objective(const RolloutGroup& group, const TabularPolicy& current, const GrpoHyperParams& hp) {
  const auto lp = current_logprobs(group, current);
  return group_objective(group, lp, hp);
}

std::vector<double> rollout_weights(const RolloutGroup& group, std::span<const double> logp_theta,
                                    const GrpoHyperParams& hp) {
  check_group(group, logp_theta);
  const double g = static_cast<double>(group.size());
  std::vector<double> w(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& r = group.rollouts[i];
    const double d = logp_theta[i] - r.logp_old;
    double surrogate = 0.0;
    if (std::fabs(d) <= hp.ratio_log_clamp) {
      const double ratio = std::exp(d);
      // d ratio / d logp_theta = ratio
      surrogate = clipped_slope(ratio, group.advantages[i], hp.clip_epsilon) * ratio;
    }
    w[i] = (surrogate - hp.kl_beta * kl_slope(logp_theta[i], r.logp_ref, hp.ratio_log_clamp)) / g;
    if (!std::isfinite(w[i])) fault("gradient weight", i, w[i]);
  }
  return w;
}

std::vector<double> objective_gradient(const RolloutGroup& group, const TabularPolicy& current,
                                       const GrpoHyperParams& hp) {
  const auto lp = current_logprobs(group, current);
  const auto w = rollout_weights(group, lp, hp);
  std::vector<double> grad(current.logits().size(), 0.0);
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (w[i] == 0.0) continue;
    add_scaled(grad, seq_logprob_grad(current, group.question.key, group.rollouts[i].tokens), w[i]);
  }
  return grad;
}

}  // namespace thinkstage
