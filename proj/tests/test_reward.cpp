#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "thinkstage/reward.hpp"

using namespace thinkstage;

namespace {

const AnswerMatchRule kExact{Normalization::kExactTrimmed, 0.0};
const AnswerMatchRule kNumeric{Normalization::kNumericTolerant, 1e-6};

FormatRule violation(std::string_view raw) {
  const auto r = parse_tagged(raw);
  EXPECT_FALSE(is_valid(r)) << raw;
  return std::get<FormatViolation>(r).rule;
}

}  // namespace

TEST(ParseTagged, MinimalWellFormed) {
  const auto r = parse_tagged("<think>2+3</think><answer>5</answer>");
  ASSERT_TRUE(is_valid(r));
  const auto& t = std::get<TaggedOutput>(r);
  EXPECT_EQ(t.think_text, "2+3");
  EXPECT_EQ(t.answer_text, "5");
}

TEST(ParseTagged, ViewsAliasInput) {
  const std::string raw = "  <think>a b</think>\n<answer> c </answer>\t";
  const auto& t = std::get<TaggedOutput>(parse_tagged(raw));
  EXPECT_GE(t.think_text.data(), raw.data());
  EXPECT_LE(t.answer_text.data() + t.answer_text.size(), raw.data() + raw.size());
  EXPECT_EQ(t.answer_text, " c ");
}

TEST(ParseTagged, Violations) {
  EXPECT_EQ(violation("<answer>5</answer><think>x</think>"), FormatRule::kWrongOrder);
  EXPECT_EQ(violation("<think>abc</thin"), FormatRule::kMissingThinkClose);
  EXPECT_EQ(violation("think</think><answer>1</answer>"), FormatRule::kMissingThinkOpen);
  EXPECT_EQ(violation("<think>x</think>1</answer>"), FormatRule::kMissingAnswerOpen);
  EXPECT_EQ(violation("<think>x</think><answer>1"), FormatRule::kMissingAnswerClose);
  EXPECT_EQ(violation("<think><think>x</think><answer>1</answer>"), FormatRule::kDuplicateTag);
  EXPECT_EQ(violation("<think>x</think> so <answer>1</answer>"), FormatRule::kStrayText);
  EXPECT_EQ(violation("pre<think>x</think><answer>1</answer>"), FormatRule::kStrayText);
  EXPECT_EQ(violation("<think>x</think><answer>1</answer>post"), FormatRule::kStrayText);
  EXPECT_EQ(violation(""), FormatRule::kMissingThinkOpen);
}

TEST(ParseTagged, NestedAnswerInsideThinkIsWrongOrder) {
  EXPECT_EQ(violation("<think><answer>1</answer></think>"), FormatRule::kWrongOrder);
}

TEST(FormatReward, Examples) {
  EXPECT_EQ(format_reward("<think>a</think><answer>b</answer>"), 1);
  EXPECT_EQ(format_reward("answer: b"), 0);
  EXPECT_EQ(format_reward("  <think>a</think>\n<answer>b</answer> "), 1);
}

TEST(ResultReward, Examples) {
  EXPECT_EQ(result_reward(" 5 ", "5", kExact), 1);
  EXPECT_EQ(result_reward("5.0001", "5", {Normalization::kNumericTolerant, 1e-3}), 1);
  EXPECT_EQ(result_reward("6", "5", kExact), 0);
  EXPECT_EQ(result_reward("Paris", "paris", {Normalization::kCaseFoldTrimmed, 0.0}), 1);
}

TEST(MatchAnswer, NumericFallbackIsFlagged) {
  const auto m = match_answer("Five", "five", kNumeric);
  EXPECT_TRUE(m.matched);
  EXPECT_TRUE(m.numeric_fallback);
  EXPECT_FALSE(match_answer("5", "5.0", kNumeric).numeric_fallback);
  EXPECT_TRUE(match_answer("+5", "5.0", kNumeric).matched);
}

TEST(MatchAnswer, DefaultRuleDependsOnGroundTruth) {
  EXPECT_EQ(default_match_rule("42").normalization, Normalization::kNumericTolerant);
  EXPECT_EQ(default_match_rule(" 3.5 ").normalization, Normalization::kNumericTolerant);
  EXPECT_EQ(default_match_rule("B").normalization, Normalization::kCaseFoldTrimmed);
}

TEST(RewardZero, Examples) {
  EXPECT_DOUBLE_EQ(reward_zero("<think>x</think><answer>5</answer>", "5", kNumeric), 1.0);
  EXPECT_DOUBLE_EQ(reward_zero("<think>x</think><answer>4</answer>", "5", kNumeric), 0.5);
  EXPECT_DOUBLE_EQ(reward_zero("no tags here", "5", kNumeric), 0.0);
  EXPECT_DOUBLE_EQ(reward_zero("", "5", kNumeric), 0.0);
}

TEST(RewardZero, MalformedUsesLastToken) {
  EXPECT_DOUBLE_EQ(reward_zero("the result is 5", "5", kNumeric), 0.5);
  EXPECT_DOUBLE_EQ(reward_zero("<think>x</think> 5", "5", kNumeric), 0.5);
  EXPECT_EQ(last_token("  a b  c \n"), "c");
  EXPECT_EQ(last_token("   "), "");
}

TEST(RewardHfrrf, TruthTable) {
  EXPECT_EQ(reward_hfrrf("<think>x</think><answer>5</answer>", "5", kNumeric), 1);
  EXPECT_EQ(reward_hfrrf("<think>x</think><answer>4</answer>", "5", kNumeric), 0);
  EXPECT_EQ(reward_hfrrf("<think>x</think> the answer is 5", "5", kNumeric), 0);
  EXPECT_EQ(reward_hfrrf("<think>x</think> 4", "5", kNumeric), 0);
}

TEST(RewardSpec, Validation) {
  EXPECT_NO_THROW(validate(RewardSpec{RewardMode::kZeroComposite, 0.3, 0.7}));
  EXPECT_THROW(validate(RewardSpec{RewardMode::kZeroComposite, 0.3, 0.3}), std::invalid_argument);
  EXPECT_THROW(validate(RewardSpec{RewardMode::kZeroComposite, -0.5, 1.5}), std::invalid_argument);
  EXPECT_NO_THROW(validate(RewardSpec{RewardMode::kHfrrf, 9.0, 9.0}));
}

TEST(RewardZero, CustomWeights) {
  const RewardSpec spec{RewardMode::kZeroComposite, 0.25, 0.75};
  EXPECT_DOUBLE_EQ(reward_zero("<think>x</think><answer>4</answer>", "5", kNumeric, spec), 0.25);
  EXPECT_DOUBLE_EQ(reward_zero("5", "5", kNumeric, spec), 0.75);
}

TEST(ParseTagged, AgreesWithRegexOracle) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> pieces{"<think>", "</think>", "<answer>", "</answer>", " ", "\n", "7", "so", "x"};
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    const int n = static_cast<int>(rng() % 9);
    for (int i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
    if (trial % 3 == 0) s = " <think>" + s + "</think> <answer>" + std::to_string(rng() % 10) + "</answer>";
    std::string think, answer;
    const bool oracle = testsupport::oracle_well_formed(s, &think, &answer);
    const auto r = parse_tagged(s);
    ASSERT_EQ(is_valid(r), oracle) << s;
    if (oracle) {
      EXPECT_EQ(std::get<TaggedOutput>(r).think_text, think);
      EXPECT_EQ(std::get<TaggedOutput>(r).answer_text, answer);
    }
  }
}

TEST(RewardBounds, HfrrfSandwichedByZeroReward) {
  std::mt19937_64 rng(12);
  const std::vector<std::string> pieces{"<think>", "</think>", "<answer>", "</answer>", " ", "4", "5", "ok"};
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    for (int i = 0, n = static_cast<int>(rng() % 10); i < n; ++i) s += pieces[rng() % pieces.size()];
    const double z = reward_zero(s, "4", kNumeric);
    const int h = reward_hfrrf(s, "4", kNumeric);
    EXPECT_LE(h, z + 0.5) << s;
    EXPECT_GE(h, 2 * z - 1) << s;
  }
}

TEST(ParseTagged, TotalOnArbitraryBytes) {
  std::mt19937_64 rng(13);
  const std::string utf8 = "\xE2\x9C\x93\xF0\x9F\x98\x80";
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    for (int i = 0, n = static_cast<int>(rng() % 40); i < n; ++i) s += static_cast<char>(rng() % 256);
    if (trial % 2) s = "<think>" + utf8.substr(0, rng() % utf8.size()) + "</think><answer>" + s;
    std::string think, answer;
    EXPECT_EQ(is_valid(parse_tagged(s)), testsupport::oracle_well_formed(s, &think, &answer));
    (void)format_reward(s);
    (void)reward_zero(s, "1", kNumeric);
  }
}

TEST(ParseTagged, RoundTripsTagFreeStrings) {
  std::mt19937_64 rng(14);
  const std::string alphabet = "ab <>/\n\t7think";
  for (int trial = 0; trial < 5000; ++trial) {
    auto gen = [&] {
      std::string s;
      for (int i = 0, n = static_cast<int>(rng() % 12); i < n; ++i) s += alphabet[rng() % alphabet.size()];
      return s;
    };
    const std::string t = gen(), a = gen();
    const std::string s = "<think>" + t + "</think><answer>" + a + "</answer>";
    bool tag_free = true;
    for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose})
      tag_free = tag_free && t.find(tag) == std::string::npos && a.find(tag) == std::string::npos;
    if (!tag_free) continue;
    const auto r = parse_tagged(s);
    ASSERT_TRUE(is_valid(r)) << s;
    EXPECT_EQ(std::get<TaggedOutput>(r).think_text, t);
    EXPECT_EQ(std::get<TaggedOutput>(r).answer_text, a);
  }
}
