#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "thinkstage/rng.hpp"
#include "thinkstage/vocab.hpp"

namespace thinkstage {

/// Markov softmax policy: one logits row per (question key, previous token)
/// state, where the previous-token axis has one extra begin-of-sequence slot.
/// Row layout is key-major: row = key * (V + 1) + prev.
class TabularPolicy {
 public:
  TabularPolicy(std::size_t num_keys, std::size_t num_tokens, Token eos);

  std::size_t num_keys() const noexcept { return num_keys_; }
  std::size_t num_tokens() const noexcept { return num_tokens_; }
  std::size_t num_states() const noexcept { return num_tokens_ + 1; }
  std::size_t num_rows() const noexcept { return num_keys_ * num_states(); }
  Token eos() const noexcept { return eos_; }
  Token bos_state() const noexcept { return static_cast<Token>(num_tokens_); }

  std::size_t row_index(std::size_t key, Token prev) const noexcept {
    return key * num_states() + static_cast<std::size_t>(prev);
  }
  std::span<double> row(std::size_t r) noexcept { return {logits_.data() + r * num_tokens_, num_tokens_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {logits_.data() + r * num_tokens_, num_tokens_};
  }

  std::span<double> logits() noexcept { return logits_; }
  std::span<const double> logits() const noexcept { return logits_; }

  /// softmax of the row into `out` (size V).
  void probs(std::size_t r, std::span<double> out) const;
  double log_normalizer(std::size_t r) const;

  bool same_shape(const TabularPolicy& other) const noexcept {
    return num_keys_ == other.num_keys_ && num_tokens_ == other.num_tokens_ && eos_ == other.eos_;
  }

 private:
  std::size_t num_keys_;
  std::size_t num_tokens_;
  Token eos_;
  std::vector<double> logits_;
};

/// Immutable, shareable copy of a policy (used for the old and reference
/// policies).
using PolicySnapshot = std::shared_ptr<const TabularPolicy>;

PolicySnapshot snapshot(const TabularPolicy& policy);

/// Autoregressive sampling. Stops after emitting eos (which is kept as the
/// last token) or after max_len tokens, whichever comes first.
std::vector<Token> sample(const TabularPolicy& policy, std::size_t key, std::size_t max_len, Rng& rng);

inline bool terminated(const TabularPolicy& policy, std::span<const Token> tokens) {
  return !tokens.empty() && tokens.back() == policy.eos();
}

/// Sum of next-token log-probabilities over `tokens`. A trailing eos is
/// scored; a truncated sequence has none to score. Throws on unknown tokens,
/// empty sequences, or an eos before the end.
double seq_logprob(const TabularPolicy& policy, std::size_t key, std::span<const Token> tokens);

/// Gradient of seq_logprob restricted to the visited rows.
struct SparseGrad {
  std::size_t width = 0;           // V
  std::vector<std::size_t> rows;   // distinct visited row indices, in first-visit order
  std::vector<double> values;      // rows.size() * width

  std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }
};

SparseGrad seq_logprob_grad(const TabularPolicy& policy, std::size_t key, std::span<const Token> tokens);

/// dense += scale * sparse
void add_scaled(std::span<double> dense, const SparseGrad& g, double scale);

/// Shape of the synthetic post-cold-start policy: it follows the tag grammar
/// with probability `format_prob` at each structural position, thinks with
/// filler words for a geometric number of tokens with mean `mean_think`, and
/// answers with a uniformly random digit.
struct ColdStartShape {
  double format_prob = 0.99;
  double mean_think = 40.0;
};

TabularPolicy make_cold_start_policy(const Vocabulary& vocab, std::size_t num_keys, const ColdStartShape& shape);

}  // namespace thinkstage
