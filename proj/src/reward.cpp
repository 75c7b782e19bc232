#include "thinkstage/reward.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace thinkstage {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::string_view describe(FormatRule rule) noexcept {
  switch (rule) {
    case FormatRule::kMissingThinkOpen: return "missing opening think tag";
    case FormatRule::kMissingThinkClose: return "missing closing think tag";
    case FormatRule::kMissingAnswerOpen: return "missing opening answer tag";
    case FormatRule::kMissingAnswerClose: return "missing closing answer tag";
    case FormatRule::kDuplicateTag: return "duplicate tag";
    case FormatRule::kWrongOrder: return "wrong order";
    case FormatRule::kStrayText: return "stray text between blocks";
  }
  return "unknown";
}

namespace {

struct TagScan {
  std::size_t count = 0;
  std::size_t pos = std::string_view::npos;
};

TagScan scan(std::string_view raw, std::string_view tag) {
  TagScan s;
  for (std::size_t p = raw.find(tag); p != std::string_view::npos; p = raw.find(tag, p + tag.size())) {
    if (s.count == 0) s.pos = p;
    ++s.count;
  }
  return s;
}

bool all_space(std::string_view s) noexcept {
  for (char c : s)
    if (!is_space(c)) return false;
  return true;
}

}  // namespace

ParseResult parse_tagged(std::string_view raw) {
  const std::array<std::string_view, 4> tags{kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose};
  const std::array<FormatRule, 4> missing{FormatRule::kMissingThinkOpen, FormatRule::kMissingThinkClose,
                                          FormatRule::kMissingAnswerOpen, FormatRule::kMissingAnswerClose};
  std::array<TagScan, 4> found;
  for (std::size_t i = 0; i < tags.size(); ++i) found[i] = scan(raw, tags[i]);

  for (std::size_t i = 0; i < tags.size(); ++i)
    if (found[i].count == 0) return FormatViolation{missing[i]};
  for (const auto& f : found)
    if (f.count > 1) return FormatViolation{FormatRule::kDuplicateTag};
  for (std::size_t i = 0; i + 1 < found.size(); ++i)
    if (found[i].pos + tags[i].size() > found[i + 1].pos) return FormatViolation{FormatRule::kWrongOrder};

  const std::size_t think_begin = found[0].pos + kThinkOpen.size();
  const std::size_t think_end = found[1].pos;
  const std::size_t answer_begin = found[2].pos + kAnswerOpen.size();
  const std::size_t answer_end = found[3].pos;

  if (!all_space(raw.substr(0, found[0].pos)) ||
      !all_space(raw.substr(think_end + kThinkClose.size(), found[2].pos - think_end - kThinkClose.size())) ||
      !all_space(raw.substr(answer_end + kAnswerClose.size())))
    return FormatViolation{FormatRule::kStrayText};

  return TaggedOutput{raw.substr(think_begin, think_end - think_begin),
                      raw.substr(answer_begin, answer_end - answer_begin), raw};
}

AnswerMatchRule default_match_rule(std::string_view ground_truth) {
  const auto t = trim(ground_truth);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (!t.empty() && ec == std::errc{} && ptr == t.data() + t.size() && std::isfinite(v))
    return {Normalization::kNumericTolerant, 1e-6};
  return {Normalization::kCaseFoldTrimmed, 0.0};
}

namespace {

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

MatchOutcome match_answer(std::string_view answer, std::string_view ground_truth,
                          const AnswerMatchRule& rule) {
  const auto a = trim(answer);
  const auto g = trim(ground_truth);
  switch (rule.normalization) {
    case Normalization::kExactTrimmed:
      return {a == g, false};
    case Normalization::kCaseFoldTrimmed:
      return {to_lower_ascii(a) == to_lower_ascii(g), false};
    case Normalization::kNumericTolerant: {
      double x = 0, y = 0;
      if (parse_number(a, x) && parse_number(g, y)) return {std::fabs(x - y) <= rule.numeric_abs_tol, false};
      return {to_lower_ascii(a) == to_lower_ascii(g), true};
    }
  }
  return {};
}

int format_reward(std::string_view raw) { return is_valid(parse_tagged(raw)) ? 1 : 0; }

int result_reward(std::string_view answer, std::string_view ground_truth, const AnswerMatchRule& rule) {
  return match_answer(answer, ground_truth, rule).matched ? 1 : 0;
}

void validate(const RewardSpec& spec) {
  auto in_unit = [](double w) { return w >= 0.0 && w <= 1.0; };
  if (spec.mode == RewardMode::kHfrrf) return;
  if (!in_unit(spec.format_weight) || !in_unit(spec.result_weight))
    throw std::invalid_argument("reward weights must lie in [0,1]");
  if (std::fabs(spec.format_weight + spec.result_weight - 1.0) > 1e-12)
    throw std::invalid_argument("reward weights must sum to 1");
}

std::string_view last_token(std::string_view raw) {
  raw = trim(raw);
  std::size_t i = raw.size();
  while (i > 0 && !is_space(raw[i - 1])) --i;
  return raw.substr(i);
}

double reward_zero(std::string_view raw, std::string_view ground_truth, const AnswerMatchRule& rule,
                   const RewardSpec& spec) {
  const auto parsed = parse_tagged(raw);
  if (const auto* t = std::get_if<TaggedOutput>(&parsed))
    return spec.format_weight + spec.result_weight * result_reward(t->answer_text, ground_truth, rule);
  const auto tail = last_token(raw);
  if (tail.empty()) return 0.0;
  return spec.result_weight * result_reward(tail, ground_truth, rule);
}

int reward_hfrrf(std::string_view raw, std::string_view ground_truth, const AnswerMatchRule& rule) {
  const auto parsed = parse_tagged(raw);
  const auto* t = std::get_if<TaggedOutput>(&parsed);
  return (t != nullptr && result_reward(t->answer_text, ground_truth, rule) == 1) ? 1 : 0;
}

}  // namespace thinkstage
