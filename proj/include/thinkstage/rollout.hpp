#pragma once

// Batched rollout kernels. Each kernel has a serial reference version
// (suffix _reference) and an OpenMP version; both produce bit-identical
// results because every rollout draws from its own id-keyed stream and all
// reductions run in a fixed index order.

#include <cstdint>
#include <span>
#include <vector>

#include "thinkstage/env.hpp"
#include "thinkstage/grpo.hpp"
#include "thinkstage/policy.hpp"
#include "thinkstage/reward.hpp"

namespace thinkstage {

struct RolloutId {
  std::uint64_t step = 0;
  std::uint64_t question = 0;
  std::uint64_t index = 0;
};

struct Scored {
  double reward = 0.0;
  bool format_valid = false;
  std::size_t think_len = 0;
};

/// Turns sampled tokens into a reward. ARITH uses the exact answer match;
/// ORACLE replaces the result reward with oracle_correct on a stream keyed
/// by (seed, question key, rollout id).
struct Scorer {
  Vocabulary vocab;
  EnvSpec env;
  RewardSpec reward;
  std::uint64_t seed = 0;

  Scored score(const Question& q, const std::string& text, const RolloutId& id) const;
};

struct SampleRequest {
  const TabularPolicy* old_policy = nullptr;
  const TabularPolicy* ref_policy = nullptr;
  std::size_t group_size = 2;
  std::size_t max_len = 8;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

std::vector<RolloutGroup> sample_groups_reference(const SampleRequest& req, std::span<const Question> batch,
                                                  const Scorer& scorer);
std::vector<RolloutGroup> sample_groups(const SampleRequest& req, std::span<const Question> batch,
                                        const Scorer& scorer);

/// logp under `policy` for every rollout, indexed [group][rollout].
std::vector<std::vector<double>> batch_logprobs_reference(std::span<const RolloutGroup> groups,
                                                          const TabularPolicy& policy);
std::vector<std::vector<double>> batch_logprobs(std::span<const RolloutGroup> groups, const TabularPolicy& policy);

/// Mean of group objectives over the batch.
double batch_objective(std::span<const RolloutGroup> groups, const std::vector<std::vector<double>>& logp_theta,
                       const GrpoHyperParams& hp);

/// Gradient of batch_objective with respect to the logits of `policy`.
std::vector<double> batch_gradient_reference(std::span<const RolloutGroup> groups, const TabularPolicy& policy,
                                             const std::vector<std::vector<double>>& logp_theta,
                                             const GrpoHyperParams& hp);
std::vector<double> batch_gradient(std::span<const RolloutGroup> groups, const TabularPolicy& policy,
                                   const std::vector<std::vector<double>>& logp_theta, const GrpoHyperParams& hp);

/// Number of OpenMP workers the parallel kernels will use.
int worker_count();
void set_worker_count(int n);

}  // namespace thinkstage
