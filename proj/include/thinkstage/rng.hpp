#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace thinkstage {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of ids
/// (step, question index, rollout index, ...). Streams depend only on the
/// ids, never on which worker draws from them.
constexpr std::uint64_t stream_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = mix64(base);
  for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632BE59BD9B4E019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
  return Rng(stream_seed(base, ids));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Stream domain tags, so that sampling and oracle draws never share a stream.
enum class StreamTag : std::uint64_t {
  kSample = 1,
  kOracle = 2,
  kBatch = 3,
  kQuestions = 4,
  kEval = 5,
};

constexpr std::uint64_t tag(StreamTag t) noexcept { return static_cast<std::uint64_t>(t); }

}  // namespace thinkstage
