#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "thinkstage/reward.hpp"
#include "thinkstage/rng.hpp"
#include "thinkstage/vocab.hpp"

namespace thinkstage {

struct Question {
  std::size_t key = 0;
  std::string prompt_text;
  std::string ground_truth;
};

/// Correct-answer acceptance as a function of think length: p_short on
/// [band_lo, band_hi], linear down to p_long at ramp_end, p_long beyond.
/// Lengths below band_lo use p_short.
struct OracleProfile {
  std::size_t band_lo = 0;
  std::size_t band_hi = 16;
  double p_short = 0.8;
  double p_long = 0.2;
  std::size_t ramp_end = 48;

  double acceptance(std::size_t think_len) const noexcept;
};

void validate(const OracleProfile& profile);

enum class EnvKind { kArith, kOracle };

struct EnvSpec {
  EnvKind kind = EnvKind::kOracle;
  std::size_t num_keys = 8;  // ORACLE only
  int digit_lo = 0;          // ARITH operand range
  int digit_hi = 9;
  OracleProfile profile;
  std::uint64_t seed = 0;

  /// Question-key cardinality the policy table must cover.
  std::size_t key_cardinality() const noexcept { return kind == EnvKind::kArith ? 100 : num_keys; }
};

EnvKind parse_env_kind(const std::string& name);  // "arith" | "oracle", throws otherwise
std::string to_string(EnvKind kind);

void validate(const EnvSpec& env);

/// ARITH: "a+b=?" with ground truth (a+b) mod 10 and key 10a+b, operands drawn
/// from `seed`. ORACLE: keys i mod K with a per-key digit fixed by env.seed.
std::vector<Question> gen_questions(const EnvSpec& env, std::uint64_t seed, std::size_t n);

/// Digit answer of an ORACLE key.
int oracle_answer(const EnvSpec& env, std::size_t key);

std::size_t think_length(const TaggedOutput& parsed, const Vocabulary& vocab);

/// Answer must match; then a Bernoulli(acceptance(think length)) draw.
bool oracle_correct(const OracleProfile& profile, const Question& question, const TaggedOutput& parsed,
                    const Vocabulary& vocab, Rng& rng);

}  // namespace thinkstage
