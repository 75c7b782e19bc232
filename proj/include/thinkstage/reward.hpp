#pragma once

#include <string>
#include <string_view>
#include <variant>

namespace thinkstage {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

/// A format-valid output split into its think and answer blocks. Both views
/// are substrings of `raw`.
struct TaggedOutput {
  std::string_view think_text;
  std::string_view answer_text;
  std::string_view raw;
};

enum class FormatRule {
  kMissingThinkOpen,
  kMissingThinkClose,
  kMissingAnswerOpen,
  kMissingAnswerClose,
  kDuplicateTag,
  kWrongOrder,
  kStrayText,
};

struct FormatViolation {
  FormatRule rule;
};

std::string_view describe(FormatRule rule) noexcept;

using ParseResult = std::variant<TaggedOutput, FormatViolation>;

/// Total over arbitrary byte strings. Accepts
///   ws* <think> .. </think> ws* <answer> .. </answer> ws*
/// with each tag occurring exactly once. The returned views alias `raw`.
ParseResult parse_tagged(std::string_view raw);

inline bool is_valid(const ParseResult& r) noexcept {
  return std::holds_alternative<TaggedOutput>(r);
}

enum class Normalization { kExactTrimmed, kCaseFoldTrimmed, kNumericTolerant };

struct AnswerMatchRule {
  Normalization normalization = Normalization::kNumericTolerant;
  double numeric_abs_tol = 1e-6;
};

/// NumericTolerant(1e-6) when the ground truth parses as a number, otherwise
/// CaseFoldTrimmed.
AnswerMatchRule default_match_rule(std::string_view ground_truth);

struct MatchOutcome {
  bool matched = false;
  // NumericTolerant could not parse one side and compared case-folded text.
  bool numeric_fallback = false;
};

MatchOutcome match_answer(std::string_view answer, std::string_view ground_truth,
                          const AnswerMatchRule& rule);

int format_reward(std::string_view raw);
int result_reward(std::string_view answer, std::string_view ground_truth,
                  const AnswerMatchRule& rule);

enum class RewardMode { kZeroComposite, kHfrrf };

struct RewardSpec {
  RewardMode mode = RewardMode::kHfrrf;
  double format_weight = 0.5;
  double result_weight = 0.5;
};

// Throws std::invalid_argument when weights are outside [0,1] or do not sum
// to one in ZeroComposite mode.
void validate(const RewardSpec& spec);

/// Last whitespace-delimited token of `raw`, empty when there is none.
std::string_view last_token(std::string_view raw);

double reward_zero(std::string_view raw, std::string_view ground_truth,
                   const AnswerMatchRule& rule, const RewardSpec& spec = {RewardMode::kZeroComposite, 0.5, 0.5});
int reward_hfrrf(std::string_view raw, std::string_view ground_truth, const AnswerMatchRule& rule);

// Helpers shared with the data pipeline.
bool is_space(char c) noexcept;
std::string_view trim(std::string_view s) noexcept;
std::string to_lower_ascii(std::string_view s);

}  // namespace thinkstage
