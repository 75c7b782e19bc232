#include "thinkstage/cot/rules.hpp"

#include <fstream>
#include <sstream>

namespace thinkstage::cot {

RuleTable default_rules() {
  RuleTable t;
  t.rewrites = {
      {"the description says", "the image shows"},
      {"the description states", "the image shows"},
      {"the description mentions", "the image shows"},
      {"The description says", "The image shows"},
      {"The description states", "The image shows"},
      {"The description mentions", "The image shows"},
  };
  return t;
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw RuleFileError("rules line " + std::to_string(line) + ": " + msg);
}

AnswerMatchRule parse_match(std::string_view v, std::size_t line) {
  std::istringstream is{std::string(v)};
  std::string kind;
  is >> kind;
  if (kind == "exact") return {Normalization::kExactTrimmed, 0.0};
  if (kind == "casefold") return {Normalization::kCaseFoldTrimmed, 0.0};
  if (kind == "numeric_tolerant") {
    double tol = 1e-6;
    if (!(is >> tol)) tol = 1e-6;
    if (tol < 0) fail(line, "numeric tolerance must be >= 0");
    return {Normalization::kNumericTolerant, tol};
  }
  fail(line, "unknown answer_match kind '" + kind + "'");
}

std::string match_to_string(const AnswerMatchRule& m) {
  switch (m.normalization) {
    case Normalization::kExactTrimmed: return "exact";
    case Normalization::kCaseFoldTrimmed: return "casefold";
    case Normalization::kNumericTolerant: {
      std::ostringstream os;
      os << "numeric_tolerant " << m.numeric_abs_tol;
      return os.str();
    }
  }
  return "";
}

}  // namespace

RuleTable parse_rules(std::string_view text) {
  RuleTable t;
  FilterRules& f = t.filters;
  bool claims_seen = false;
  bool banned_seen = false;
  enum class Section { kNone, kRewrites, kFilters } section = Section::kNone;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "[rewrites]") {
      section = Section::kRewrites;
      continue;
    }
    if (line == "[filters]") {
      section = Section::kFilters;
      continue;
    }
    if (section == Section::kRewrites) {
      const auto arrow = line.find("=>");
      if (arrow == std::string_view::npos) fail(line_no, "expected 'pattern => replacement'");
      const auto pattern = trim(line.substr(0, arrow));
      if (pattern.empty()) fail(line_no, "empty rewrite pattern");
      t.rewrites.push_back({std::string(pattern), std::string(trim(line.substr(arrow + 2)))});
    } else if (section == Section::kFilters) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) fail(line_no, "expected 'name = value'");
      const std::string name(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (name == "answer_match") {
        f.match = parse_match(value, line_no);
      } else if (name == "max_think_words") {
        if (value == "off") {
          f.max_think_words.reset();
        } else {
          try {
            f.max_think_words = std::stoul(value);
          } catch (const std::exception&) {
            fail(line_no, "max_think_words expects an integer or 'off'");
          }
        }
      } else if (name == "trailing_claim") {
        if (!claims_seen) f.claim_phrases.clear();
        claims_seen = true;
        if (value != "off") f.claim_phrases.push_back(value);
      } else if (name == "banned_phrase") {
        if (!banned_seen) f.banned_phrases.clear();
        banned_seen = true;
        if (value != "off") f.banned_phrases.push_back(value);
      } else {
        fail(line_no, "unknown filter '" + name + "'");
      }
    } else {
      fail(line_no, "content outside a [rewrites] or [filters] section");
    }
  }
  return t;
}

RuleTable load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuleFileError("cannot read rule file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rules(ss.str());
}

std::string render_rules(const RuleTable& rules) {
  std::ostringstream os;
  os << "[rewrites]\n";
  for (const auto& r : rules.rewrites) os << r.pattern << " => " << r.replacement << '\n';
  os << "\n[filters]\n";
  os << "answer_match = " << match_to_string(rules.filters.match) << '\n';
  if (rules.filters.max_think_words)
    os << "max_think_words = " << *rules.filters.max_think_words << '\n';
  else
    os << "max_think_words = off\n";
  if (rules.filters.claim_phrases.empty()) os << "trailing_claim = off\n";
  for (const auto& p : rules.filters.claim_phrases) os << "trailing_claim = " << p << '\n';
  if (rules.filters.banned_phrases.empty()) os << "banned_phrase = off\n";
  for (const auto& p : rules.filters.banned_phrases) os << "banned_phrase = " << p << '\n';
  return os.str();
}

std::string apply_rewrites(std::string_view text, std::span<const RewriteRule> rules) {
  std::string cur(text);
  for (const auto& rule : rules) {
    if (rule.pattern.empty()) continue;
    std::string next;
    next.reserve(cur.size());
    std::size_t pos = 0;
    for (std::size_t hit = cur.find(rule.pattern); hit != std::string::npos; hit = cur.find(rule.pattern, pos)) {
      next.append(cur, pos, hit - pos);
      next += rule.replacement;
      pos = hit + rule.pattern.size();
    }
    next.append(cur, pos, std::string::npos);
    cur = std::move(next);
  }
  return cur;
}

std::optional<std::string> trailing_claim(std::string_view think_text, std::span<const std::string> phrases) {
  const std::string lower = to_lower_ascii(think_text);
  std::size_t best = std::string::npos;
  std::size_t best_end = 0;
  for (const auto& phrase : phrases) {
    if (phrase.empty()) continue;
    const auto p = lower.rfind(to_lower_ascii(phrase));
    if (p != std::string::npos && (best == std::string::npos || p > best)) {
      best = p;
      best_end = p + phrase.size();
    }
  }
  if (best == std::string::npos) return std::nullopt;
  auto rest = think_text.substr(best_end);
  rest = rest.substr(0, rest.find('\n'));
  rest = trim(rest);
  if (!rest.empty() && rest.front() == ':') rest = trim(rest.substr(1));
  while (!rest.empty() && std::string_view(".,;:!?").find(rest.back()) != std::string_view::npos)
    rest.remove_suffix(1);
  rest = trim(rest);
  if (rest.empty()) return std::nullopt;
  return std::string(rest);
}

}  // namespace thinkstage::cot
