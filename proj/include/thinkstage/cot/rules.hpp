#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thinkstage/reward.hpp"

namespace thinkstage::cot {

struct RewriteRule {
  std::string pattern;
  std::string replacement;
};

/// Declarative filter settings. A disengaged optional or an empty list turns
/// the corresponding filter off.
struct FilterRules {
  AnswerMatchRule match{Normalization::kNumericTolerant, 1e-6};
  std::optional<std::size_t> max_think_words = 8192;
  std::vector<std::string> claim_phrases{"the answer is", "the final answer is"};
  std::vector<std::string> banned_phrases{"as an AI", "cannot see the image"};
};

struct RuleTable {
  std::vector<RewriteRule> rewrites;
  FilterRules filters;
};

class RuleFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RuleTable default_rules();

/// Rule file format:
///
///   # comment
///   [rewrites]
///   the description says => the image shows
///   [filters]
///   answer_match = numeric_tolerant 1e-6   (or exact | casefold)
///   max_think_words = 8192                 (or off)
///   trailing_claim = the answer is         (repeatable; "off" clears)
///   banned_phrase = as an AI               (repeatable; "off" clears)
///
/// Filters not mentioned keep their defaults.
RuleTable parse_rules(std::string_view text);
RuleTable load_rules(const std::filesystem::path& path);
std::string render_rules(const RuleTable& rules);

/// Applies each rule in order, replacing every non-overlapping occurrence
/// left to right. Replaced text is not rescanned by the same rule.
std::string apply_rewrites(std::string_view text, std::span<const RewriteRule> rules);

/// Text following the last claim phrase (case-insensitive) up to the end of
/// its line, with surrounding whitespace and trailing punctuation removed.
std::optional<std::string> trailing_claim(std::string_view think_text, std::span<const std::string> phrases);

}  // namespace thinkstage::cot
