#include "thinkstage/trainer.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

namespace thinkstage {

std::string to_json_line(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["stage"] = m.stage;
  j["mean_reward"] = m.mean_reward;
  j["mean_len"] = m.mean_len;
  j["mean_think_len"] = m.mean_think_len;
  j["objective"] = m.objective;
  j["kl"] = m.kl;
  return j.dump();
}

Trainer::Trainer(TabularPolicy initial, Scorer scorer, GrpoHyperParams hp, std::uint64_t seed, bool parallel)
    : current_(std::move(initial)),
      ref_(snapshot(current_)),
      scorer_(std::move(scorer)),
      hp_(hp),
      seed_(seed),
      parallel_(parallel) {
  validate(hp_);
  validate(scorer_.reward);
  if (current_.num_keys() < scorer_.env.key_cardinality())
    throw std::invalid_argument("policy table has fewer keys than the environment");
  if (current_.num_tokens() != scorer_.vocab.size()) throw std::invalid_argument("policy and vocabulary disagree on V");
}

StepMetrics Trainer::train_step(std::span<const Question> batch, const StageConfig& stage) {
  if (batch.empty()) throw std::invalid_argument("train_step needs a non-empty batch");
  const PolicySnapshot old = snapshot(current_);

  SampleRequest req;
  req.old_policy = old.get();
  req.ref_policy = ref_.get();
  req.group_size = stage.group_size;
  req.max_len = stage.max_len;
  req.seed = seed_;
  req.step = step_;
  const auto groups = parallel_ ? sample_groups(req, batch, scorer_) : sample_groups_reference(req, batch, scorer_);

  StepMetrics m;
  m.step = step_;
  m.stage = stage.index;
  std::size_t valid = 0;
  double think_sum = 0.0;
  for (const auto& g : groups) {
    for (const auto& r : g.rollouts) {
      ++m.rollouts;
      m.mean_reward += r.reward;
      m.mean_len += static_cast<double>(r.tokens.size());
      m.max_rollout_len = std::max(m.max_rollout_len, r.tokens.size());
      m.kl += kl_value(r.logp_old, r.logp_ref, hp_.ratio_log_clamp);
      if (r.format_valid) {
        ++valid;
        think_sum += static_cast<double>(r.think_len);
      }
    }
  }
  const double n = static_cast<double>(m.rollouts);
  m.mean_reward /= n;
  m.mean_len /= n;
  m.kl /= n;
  m.format_rate = static_cast<double>(valid) / n;
  m.mean_think_len = valid ? think_sum / static_cast<double>(valid) : 0.0;

  auto logprobs = [&](const TabularPolicy& p) {
    return parallel_ ? batch_logprobs(groups, p) : batch_logprobs_reference(groups, p);
  };
  auto lp = logprobs(current_);
  for (std::size_t u = 0; u < hp_.inner_updates; ++u) {
    const auto grad = parallel_ ? batch_gradient(groups, current_, lp, hp_)
                                : batch_gradient_reference(groups, current_, lp, hp_);
    auto logits = current_.logits();
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += hp_.learning_rate * grad[i];
    lp = logprobs(current_);
  }
  m.objective = batch_objective(groups, lp, hp_);
  if (!std::isfinite(m.objective) || !std::isfinite(m.kl))
    throw NumericFault("non-finite step metrics at step " + std::to_string(step_));
  ++step_;
  return m;
}

}  // namespace thinkstage
