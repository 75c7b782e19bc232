#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "thinkstage/env.hpp"
#include "thinkstage/schedule.hpp"
#include "thinkstage/trainer.hpp"

namespace thinkstage {

/// Fixed question pool; each step draws `batch_size` questions with
/// replacement from a stream keyed by (seed, step).
class QuestionSource {
 public:
  QuestionSource(std::vector<Question> pool, std::size_t batch_size, std::uint64_t seed);

  std::vector<Question> batch(std::size_t step) const;
  const std::vector<Question>& pool() const noexcept { return pool_; }
  std::size_t batch_size() const noexcept { return batch_size_; }

 private:
  std::vector<Question> pool_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

using MetricsSink = std::function<void(const StepMetrics&)>;

/// Runs train_step for every step of the schedule with that step's stage
/// limits. Only (L_s, G_s) change at stage boundaries; the reference policy
/// stays the one the trainer was built with.
std::vector<StepMetrics> run_ptst(Trainer& trainer, const Schedule& schedule, const QuestionSource& questions,
                                  const MetricsSink& sink = {});

struct EvalResult {
  double accuracy = 0.0;     // mean reward under the scorer
  double format_rate = 0.0;  // fraction of format-valid samples
  double mean_len = 0.0;
  double mean_think_len = 0.0;
};

/// Samples `per_question` outputs for every question in `questions` at cap
/// `max_len` and scores them; streams are keyed by `seed` only.
EvalResult evaluate(const TabularPolicy& policy, const Scorer& scorer, std::span<const Question> questions,
                    std::size_t per_question, std::size_t max_len, std::uint64_t seed);

}  // namespace thinkstage
