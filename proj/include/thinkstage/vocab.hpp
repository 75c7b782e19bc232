#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace thinkstage {

using Token = int;

/// Token inventory of the toy policy: the four tags, digits 0-9, a set of
/// filler words and an end-of-sequence marker, in that id order.
class Vocabulary {
 public:
  explicit Vocabulary(std::size_t num_fillers = 4);

  std::size_t size() const noexcept { return texts_.size(); }

  Token think_open() const noexcept { return 0; }
  Token think_close() const noexcept { return 1; }
  Token answer_open() const noexcept { return 2; }
  Token answer_close() const noexcept { return 3; }
  Token digit(int d) const noexcept { return 4 + d; }
  Token filler(std::size_t i) const noexcept { return static_cast<Token>(14 + i); }
  Token eos() const noexcept { return static_cast<Token>(texts_.size() - 1); }
  std::size_t num_fillers() const noexcept { return texts_.size() - 15; }

  bool is_tag(Token t) const noexcept { return t >= 0 && t < 4; }
  bool is_digit(Token t) const noexcept { return t >= 4 && t < 14; }
  bool is_filler(Token t) const noexcept { return t >= 14 && t < eos(); }

  std::string_view text(Token t) const { return texts_.at(static_cast<std::size_t>(t)); }
  std::optional<Token> lookup(std::string_view word) const;

  /// Tags are glued to their neighbours; adjacent content tokens are joined
  /// by one space. The end-of-sequence token renders as nothing.
  std::string detokenize(std::span<const Token> tokens) const;

  /// Number of whitespace-separated words of `text` that are vocabulary
  /// items.
  std::size_t count_tokens(std::string_view text) const;

 private:
  std::vector<std::string> texts_;
};

}  // namespace thinkstage
