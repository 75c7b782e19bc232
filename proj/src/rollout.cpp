#include "thinkstage/rollout.hpp"

#include <stdexcept>
#include <variant>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace thinkstage {

Scored Scorer::score(const Question& q, const std::string& text, const RolloutId& id) const {
  const auto rule = default_match_rule(q.ground_truth);
  const auto parsed = parse_tagged(text);
  const auto* tagged = std::get_if<TaggedOutput>(&parsed);
  Scored out;
  out.format_valid = tagged != nullptr;
  if (tagged) out.think_len = think_length(*tagged, vocab);

  int result = 0;
  if (tagged) {
    if (env.kind == EnvKind::kOracle) {
      Rng rng = make_stream(seed, {tag(StreamTag::kOracle), q.key, id.step, id.question, id.index});
      result = oracle_correct(env.profile, q, *tagged, vocab, rng) ? 1 : 0;
    } else {
      result = result_reward(tagged->answer_text, q.ground_truth, rule);
    }
  }

  if (reward.mode == RewardMode::kHfrrf) {
    out.reward = (tagged && result) ? 1.0 : 0.0;
  } else if (tagged) {
    out.reward = reward.format_weight + reward.result_weight * result;
  } else {
    const auto tail = last_token(text);
    out.reward = tail.empty() ? 0.0 : reward.result_weight * result_reward(tail, q.ground_truth, rule);
  }
  return out;
}

namespace {

Rollout make_rollout(const SampleRequest& req, const Question& q, std::size_t qi, std::size_t ri,
                     const Scorer& scorer) {
  Rng rng = make_stream(req.seed, {tag(StreamTag::kSample), req.step, qi, ri});
  Rollout r;
  r.tokens = sample(*req.old_policy, q.key, req.max_len, rng);
  r.text = scorer.vocab.detokenize(r.tokens);
  r.logp_old = seq_logprob(*req.old_policy, q.key, r.tokens);
  r.logp_ref = seq_logprob(*req.ref_policy, q.key, r.tokens);
  const auto s = scorer.score(q, r.text, {req.step, qi, ri});
  r.reward = s.reward;
  r.format_valid = s.format_valid;
  r.think_len = s.think_len;
  return r;
}

std::vector<RolloutGroup> empty_groups(const SampleRequest& req, std::span<const Question> batch) {
  if (!req.old_policy || !req.ref_policy) throw std::invalid_argument("sample request needs old and ref policies");
  if (batch.empty()) throw std::invalid_argument("empty question batch");
  if (req.group_size < 2) throw std::invalid_argument("group size must be >= 2");
  std::vector<RolloutGroup> groups(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    groups[i].question = batch[i];
    groups[i].rollouts.resize(req.group_size);
  }
  return groups;
}

}  // namespace

std::vector<RolloutGroup> sample_groups_reference(const SampleRequest& req, std::span<const Question> batch,
                                                  const Scorer& scorer) {
  auto groups = empty_groups(req, batch);
  for (std::size_t qi = 0; qi < groups.size(); ++qi) {
    for (std::size_t ri = 0; ri < req.group_size; ++ri)
      groups[qi].rollouts[ri] = make_rollout(req, batch[qi], qi, ri, scorer);
    assign_advantages(groups[qi]);
  }
  return groups;
}

std::vector<RolloutGroup> sample_groups(const SampleRequest& req, std::span<const Question> batch,
                                        const Scorer& scorer) {
  auto groups = empty_groups(req, batch);
  const auto n = static_cast<long>(groups.size() * req.group_size);
#pragma omp parallel for schedule(dynamic, 4)
  for (long flat = 0; flat < n; ++flat) {
    const auto qi = static_cast<std::size_t>(flat) / req.group_size;
    const auto ri = static_cast<std::size_t>(flat) % req.group_size;
    groups[qi].rollouts[ri] = make_rollout(req, batch[qi], qi, ri, scorer);
  }
  for (auto& g : groups) assign_advantages(g);
  return groups;
}

std::vector<std::vector<double>> batch_logprobs_reference(std::span<const RolloutGroup> groups,
                                                          const TabularPolicy& policy) {
  std::vector<std::vector<double>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(current_logprobs(g, policy));
  return out;
}

std::vector<std::vector<double>> batch_logprobs(std::span<const RolloutGroup> groups, const TabularPolicy& policy) {
  std::vector<std::vector<double>> out(groups.size());
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out[g].resize(groups[g].size());
    for (std::size_t i = 0; i < groups[g].size(); ++i) index.emplace_back(g, i);
  }
  const auto n = static_cast<long>(index.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long k = 0; k < n; ++k) {
    const auto [g, i] = index[static_cast<std::size_t>(k)];
    out[g][i] = seq_logprob(policy, groups[g].question.key, groups[g].rollouts[i].tokens);
  }
  return out;
}

double batch_objective(std::span<const RolloutGroup> groups, const std::vector<std::vector<double>>& logp_theta,
                       const GrpoHyperParams& hp) {
  if (groups.empty()) throw std::invalid_argument("empty batch");
  double total = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) total += group_objective(groups[g], logp_theta[g], hp);
  return total / static_cast<double>(groups.size());
}

std::vector<double> batch_gradient_reference(std::span<const RolloutGroup> groups, const TabularPolicy& policy,
                                             const std::vector<std::vector<double>>& logp_theta,
                                             const GrpoHyperParams& hp) {
  std::vector<double> grad(policy.logits().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto w = rollout_weights(groups[g], logp_theta[g], hp);
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      if (w[i] == 0.0) continue;
      add_scaled(grad, seq_logprob_grad(policy, groups[g].question.key, groups[g].rollouts[i].tokens),
                 w[i] * scale);
    }
  }
  return grad;
}

std::vector<double> batch_gradient(std::span<const RolloutGroup> groups, const TabularPolicy& policy,
                                   const std::vector<std::vector<double>>& logp_theta, const GrpoHyperParams& hp) {
  std::vector<std::vector<double>> weights(groups.size());
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    weights[g] = rollout_weights(groups[g], logp_theta[g], hp);
    for (std::size_t i = 0; i < groups[g].size(); ++i)
      if (weights[g][i] != 0.0) index.emplace_back(g, i);
  }
  std::vector<SparseGrad> parts(index.size());
  const auto n = static_cast<long>(index.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long k = 0; k < n; ++k) {
    const auto [g, i] = index[static_cast<std::size_t>(k)];
    parts[static_cast<std::size_t>(k)] =
        seq_logprob_grad(policy, groups[g].question.key, groups[g].rollouts[i].tokens);
  }
  // Fixed-order reduction keeps the sum independent of the worker count.
  std::vector<double> grad(policy.logits().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(groups.size());
  for (std::size_t k = 0; k < index.size(); ++k) {
    const auto [g, i] = index[k];
    add_scaled(grad, parts[k], weights[g][i] * scale);
  }
  return grad;
}

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_worker_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace thinkstage
