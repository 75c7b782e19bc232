#include "thinkstage/env.hpp"

#include <stdexcept>

namespace thinkstage {

double OracleProfile::acceptance(std::size_t think_len) const noexcept {
  if (think_len <= band_hi) return p_short;
  if (think_len >= ramp_end) return p_long;
  const double t = static_cast<double>(think_len - band_hi) / static_cast<double>(ramp_end - band_hi);
  return p_short + (p_long - p_short) * t;
}

void validate(const OracleProfile& p) {
  if (!(p.p_long >= 0.0 && p.p_long < p.p_short && p.p_short <= 1.0))
    throw std::invalid_argument("oracle profile requires 0 <= p_long < p_short <= 1");
  if (p.band_lo > p.band_hi) throw std::invalid_argument("oracle profile band is empty");
  if (p.ramp_end <= p.band_hi) throw std::invalid_argument("oracle profile ramp must end after the band");
}

EnvKind parse_env_kind(const std::string& name) {
  if (name == "arith") return EnvKind::kArith;
  if (name == "oracle") return EnvKind::kOracle;
  throw std::invalid_argument("unknown environment '" + name + "'");
}

std::string to_string(EnvKind kind) { return kind == EnvKind::kArith ? "arith" : "oracle"; }

void validate(const EnvSpec& env) {
  if (env.kind == EnvKind::kArith) {
    if (env.digit_lo < 0 || env.digit_hi > 9 || env.digit_lo > env.digit_hi)
      throw std::invalid_argument("arith digit range must lie within [0, 9]");
  } else {
    if (env.num_keys == 0) throw std::invalid_argument("oracle env needs at least one key");
    validate(env.profile);
  }
}

int oracle_answer(const EnvSpec& env, std::size_t key) {
  return static_cast<int>(stream_seed(env.seed, {tag(StreamTag::kQuestions), key}) % 10);
}

std::vector<Question> gen_questions(const EnvSpec& env, std::uint64_t seed, std::size_t n) {
  validate(env);
  if (n == 0) throw std::invalid_argument("question count must be positive");
  std::vector<Question> out;
  out.reserve(n);
  if (env.kind == EnvKind::kArith) {
    Rng rng = make_stream(seed, {tag(StreamTag::kQuestions)});
    const auto span = static_cast<std::uint64_t>(env.digit_hi - env.digit_lo + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const int a = env.digit_lo + static_cast<int>(rng() % span);
      const int b = env.digit_lo + static_cast<int>(rng() % span);
      out.push_back({static_cast<std::size_t>(10 * a + b), std::to_string(a) + "+" + std::to_string(b) + "=?",
                     std::to_string((a + b) % 10)});
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t key = i % env.num_keys;
      out.push_back({key, "q" + std::to_string(key), std::to_string(oracle_answer(env, key))});
    }
  }
  return out;
}

std::size_t think_length(const TaggedOutput& parsed, const Vocabulary& vocab) {
  return vocab.count_tokens(parsed.think_text);
}

bool oracle_correct(const OracleProfile& profile, const Question& question, const TaggedOutput& parsed,
                    const Vocabulary& vocab, Rng& rng) {
  if (!match_answer(parsed.answer_text, question.ground_truth, default_match_rule(question.ground_truth)).matched)
    return false;
  return uniform01(rng) < profile.acceptance(think_length(parsed, vocab));
}

}  // namespace thinkstage
