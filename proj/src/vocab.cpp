#include "thinkstage/vocab.hpp"

#include <array>
#include <stdexcept>

#include "thinkstage/reward.hpp"

namespace thinkstage {

namespace {
constexpr std::array<std::string_view, 8> kFillerWords{"so", "then", "thus", "next", "now", "hence", "also", "well"};
}

Vocabulary::Vocabulary(std::size_t num_fillers) {
  if (num_fillers < 1 || num_fillers > kFillerWords.size())
    throw std::invalid_argument("filler count must be in [1, 8]");
  texts_ = {std::string(kThinkOpen), std::string(kThinkClose), std::string(kAnswerOpen),
            std::string(kAnswerClose)};
  for (int d = 0; d < 10; ++d) texts_.push_back(std::to_string(d));
  for (std::size_t i = 0; i < num_fillers; ++i) texts_.emplace_back(kFillerWords[i]);
  texts_.emplace_back("");  // eos
}

std::optional<Token> Vocabulary::lookup(std::string_view word) const {
  for (std::size_t i = 0; i + 1 < texts_.size(); ++i)
    if (texts_[i] == word) return static_cast<Token>(i);
  return std::nullopt;
}

std::string Vocabulary::detokenize(std::span<const Token> tokens) const {
  std::string out;
  bool prev_content = false;
  for (Token t : tokens) {
    if (t == eos()) break;
    const bool content = !is_tag(t);
    if (content && prev_content) out.push_back(' ');
    out += text(t);
    prev_content = content;
  }
  return out;
}

std::size_t Vocabulary::count_tokens(std::string_view text) const {
  std::size_t n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i && lookup(text.substr(i, j - i))) ++n;
    i = j;
  }
  return n;
}

}  // namespace thinkstage
