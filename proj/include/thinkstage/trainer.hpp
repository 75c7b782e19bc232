#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "thinkstage/grpo.hpp"
#include "thinkstage/policy.hpp"
#include "thinkstage/rollout.hpp"
#include "thinkstage/schedule.hpp"

namespace thinkstage {

struct StepMetrics {
  std::size_t step = 0;
  std::size_t stage = 0;
  double mean_reward = 0.0;
  double mean_len = 0.0;
  double mean_think_len = 0.0;  // over format-valid rollouts, 0 when none
  double objective = 0.0;       // batch objective after the last inner update
  double kl = 0.0;              // mean kl_value(old, ref) over sampled rollouts

  // Not serialized; used by tests and the dynamics summary.
  std::size_t rollouts = 0;
  std::size_t max_rollout_len = 0;
  double format_rate = 0.0;
};

/// One JSON object with exactly the fields step, stage, mean_reward,
/// mean_len, mean_think_len, objective, kl, in that order.
std::string to_json_line(const StepMetrics& m);

/// GRPO trainer over the tabular policy. Owns the current parameters and the
/// reference snapshot taken at construction; the old snapshot is refreshed at
/// the start of every train_step.
class Trainer {
 public:
  Trainer(TabularPolicy initial, Scorer scorer, GrpoHyperParams hp, std::uint64_t seed, bool parallel = true);

  StepMetrics train_step(std::span<const Question> batch, const StageConfig& stage);

  const TabularPolicy& policy() const noexcept { return current_; }
  const PolicySnapshot& reference() const noexcept { return ref_; }
  const Scorer& scorer() const noexcept { return scorer_; }
  const GrpoHyperParams& hyper_params() const noexcept { return hp_; }
  std::size_t steps_done() const noexcept { return step_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  TabularPolicy current_;
  PolicySnapshot ref_;
  Scorer scorer_;
  GrpoHyperParams hp_;
  std::uint64_t seed_;
  bool parallel_;
  std::size_t step_ = 0;
};

}  // namespace thinkstage
