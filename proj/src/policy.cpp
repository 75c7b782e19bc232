#include "thinkstage/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thinkstage {

TabularPolicy::TabularPolicy(std::size_t num_keys, std::size_t num_tokens, Token eos)
    : num_keys_(num_keys), num_tokens_(num_tokens), eos_(eos), logits_(num_keys * (num_tokens + 1) * num_tokens, 0.0) {
  if (num_keys == 0 || num_tokens < 2) throw std::invalid_argument("policy needs K >= 1 and V >= 2");
  if (eos < 0 || static_cast<std::size_t>(eos) >= num_tokens) throw std::invalid_argument("eos outside vocabulary");
}

double TabularPolicy::log_normalizer(std::size_t r) const {
  const auto x = row(r);
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

void TabularPolicy::probs(std::size_t r, std::span<double> out) const {
  const auto x = row(r);
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (out[i] = std::exp(x[i] - m));
  for (double& p : out) p /= s;
}

PolicySnapshot snapshot(const TabularPolicy& policy) { return std::make_shared<const TabularPolicy>(policy); }

std::vector<Token> sample(const TabularPolicy& policy, std::size_t key, std::size_t max_len, Rng& rng) {
  if (key >= policy.num_keys()) throw std::out_of_range("question key outside policy table");
  std::vector<Token> out;
  out.reserve(std::min<std::size_t>(max_len, 64));
  std::vector<double> p(policy.num_tokens());
  Token prev = policy.bos_state();
  while (out.size() < max_len) {
    policy.probs(policy.row_index(key, prev), p);
    const double u = uniform01(rng);
    double acc = 0.0;
    Token next = static_cast<Token>(p.size() - 1);
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        next = static_cast<Token>(i);
        break;
      }
    }
    out.push_back(next);
    if (next == policy.eos()) break;
    prev = next;
  }
  return out;
}

namespace {

void check_sequence(const TabularPolicy& policy, std::size_t key, std::span<const Token> tokens) {
  if (key >= policy.num_keys()) throw std::out_of_range("question key outside policy table");
  if (tokens.empty()) throw std::invalid_argument("empty token sequence");
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= policy.num_tokens())
      throw std::invalid_argument("unknown token id " + std::to_string(tokens[t]));
    if (tokens[t] == policy.eos() && t + 1 != tokens.size())
      throw std::invalid_argument("eos before end of sequence");
  }
}

}  // namespace

double seq_logprob(const TabularPolicy& policy, std::size_t key, std::span<const Token> tokens) {
  check_sequence(policy, key, tokens);
  double lp = 0.0;
  Token prev = policy.bos_state();
  for (Token t : tokens) {
    const std::size_t r = policy.row_index(key, prev);
    lp += policy.row(r)[static_cast<std::size_t>(t)] - policy.log_normalizer(r);
    prev = t;
  }
  return lp;
}

SparseGrad seq_logprob_grad(const TabularPolicy& policy, std::size_t key, std::span<const Token> tokens) {
  check_sequence(policy, key, tokens);
  const std::size_t V = policy.num_tokens();
  SparseGrad g;
  g.width = V;
  std::vector<double> p(V);
  Token prev = policy.bos_state();
  for (Token t : tokens) {
    const std::size_t r = policy.row_index(key, prev);
    auto it = std::find(g.rows.begin(), g.rows.end(), r);
    std::size_t slot = static_cast<std::size_t>(it - g.rows.begin());
    if (it == g.rows.end()) {
      g.rows.push_back(r);
      g.values.resize(g.values.size() + V, 0.0);
    }
    policy.probs(r, p);
    double* dst = g.values.data() + slot * V;
    for (std::size_t i = 0; i < V; ++i) dst[i] -= p[i];
    dst[static_cast<std::size_t>(t)] += 1.0;
    prev = t;
  }
  return g;
}

void add_scaled(std::span<double> dense, const SparseGrad& g, double scale) {
  for (std::size_t i = 0; i < g.rows.size(); ++i) {
    double* dst = dense.data() + g.rows[i] * g.width;
    const auto src = g.row(i);
    for (std::size_t j = 0; j < g.width; ++j) dst[j] += scale * src[j];
  }
}

TabularPolicy make_cold_start_policy(const Vocabulary& vocab, std::size_t num_keys, const ColdStartShape& shape) {
  if (!(shape.format_prob > 0.0 && shape.format_prob < 1.0)) throw std::invalid_argument("format_prob must be in (0,1)");
  if (!(shape.mean_think >= 0.0)) throw std::invalid_argument("mean_think must be >= 0");
  const std::size_t V = vocab.size();
  TabularPolicy policy(num_keys, V, vocab.eos());
  const double f = shape.format_prob;
  const double stop = 1.0 / (shape.mean_think + 1.0);

  // Writes log-probabilities: `mass` over `targets` (split evenly), the
  // remaining 1-f spread over every other token.
  auto set_row = [&](std::size_t r, const std::vector<std::pair<Token, double>>& targets) {
    std::vector<double> prob(V, (1.0 - f) / static_cast<double>(V - targets.size()));
    for (const auto& [tok, mass] : targets) prob[static_cast<std::size_t>(tok)] = f * mass;
    auto row = policy.row(r);
    for (std::size_t i = 0; i < V; ++i) row[i] = std::log(prob[i]);
  };

  std::vector<std::pair<Token, double>> thinking;
  for (std::size_t i = 0; i < vocab.num_fillers(); ++i)
    thinking.emplace_back(vocab.filler(i), (1.0 - stop) / static_cast<double>(vocab.num_fillers()));
  thinking.emplace_back(vocab.think_close(), stop);
  std::vector<std::pair<Token, double>> digits;
  for (int d = 0; d < 10; ++d) digits.emplace_back(vocab.digit(d), 0.1);

  for (std::size_t k = 0; k < num_keys; ++k) {
    set_row(policy.row_index(k, policy.bos_state()), {{vocab.think_open(), 1.0}});
    set_row(policy.row_index(k, vocab.think_open()), thinking);
    for (std::size_t i = 0; i < vocab.num_fillers(); ++i) set_row(policy.row_index(k, vocab.filler(i)), thinking);
    set_row(policy.row_index(k, vocab.think_close()), {{vocab.answer_open(), 1.0}});
    set_row(policy.row_index(k, vocab.answer_open()), digits);
    for (int d = 0; d < 10; ++d) set_row(policy.row_index(k, vocab.digit(d)), {{vocab.answer_close(), 1.0}});
    set_row(policy.row_index(k, vocab.answer_close()), {{vocab.eos(), 1.0}});
  }
  return policy;
}

}  // namespace thinkstage
