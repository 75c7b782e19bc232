#include "thinkstage/ptst.hpp"

#include <stdexcept>

namespace thinkstage {

QuestionSource::QuestionSource(std::vector<Question> pool, std::size_t batch_size, std::uint64_t seed)
    : pool_(std::move(pool)), batch_size_(batch_size), seed_(seed) {
  if (pool_.empty()) throw std::invalid_argument("question pool is empty");
  if (batch_size_ == 0) throw std::invalid_argument("batch size must be positive");
}

std::vector<Question> QuestionSource::batch(std::size_t step) const {
  Rng rng = make_stream(seed_, {tag(StreamTag::kBatch), step});
  std::vector<Question> out;
  out.reserve(batch_size_);
  for (std::size_t i = 0; i < batch_size_; ++i) out.push_back(pool_[rng() % pool_.size()]);
  return out;
}

std::vector<StepMetrics> run_ptst(Trainer& trainer, const Schedule& schedule, const QuestionSource& questions,
                                  const MetricsSink& sink) {
  validate(schedule);
  std::vector<StepMetrics> log;
  log.reserve(schedule.total_steps());
  for (std::size_t step = 0; step < schedule.total_steps(); ++step) {
    const StageConfig& stage = stage_at(step, schedule);
    const auto batch = questions.batch(step);
    log.push_back(trainer.train_step(batch, stage));
    if (sink) sink(log.back());
  }
  return log;
}

EvalResult evaluate(const TabularPolicy& policy, const Scorer& scorer, std::span<const Question> questions,
                    std::size_t per_question, std::size_t max_len, std::uint64_t seed) {
  if (questions.empty() || per_question == 0) throw std::invalid_argument("evaluation needs questions and samples");
  const std::size_t n = questions.size() * per_question;
  std::vector<Scored> scored(n);
  std::vector<std::size_t> lens(n);
  const auto total = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long k = 0; k < total; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const std::size_t qi = idx / per_question;
    const std::size_t ri = idx % per_question;
    Rng rng = make_stream(seed, {tag(StreamTag::kEval), qi, ri});
    const auto tokens = sample(policy, questions[qi].key, max_len, rng);
    lens[idx] = tokens.size();
    // Eval ids live in their own step range so they never collide with
    // training oracle streams.
    scored[idx] = scorer.score(questions[qi], scorer.vocab.detokenize(tokens), {~std::uint64_t{0}, qi, ri});
  }
  EvalResult r;
  std::size_t valid = 0;
  double think = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.accuracy += scored[i].reward;
    r.mean_len += static_cast<double>(lens[i]);
    if (scored[i].format_valid) {
      ++valid;
      think += static_cast<double>(scored[i].think_len);
    }
  }
  r.accuracy /= static_cast<double>(n);
  r.mean_len /= static_cast<double>(n);
  r.format_rate = static_cast<double>(valid) / static_cast<double>(n);
  r.mean_think_len = valid ? think / static_cast<double>(valid) : 0.0;
  return r;
}

}  // namespace thinkstage
