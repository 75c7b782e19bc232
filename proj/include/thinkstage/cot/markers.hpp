#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace thinkstage::cot {

/// Self-reflection indicators counted over reasoning corpora.
inline const std::vector<std::string> kDefaultMarkers{"Wait", "Hmm", "Mistake", "Alternatively", "Check"};

/// Case-insensitive occurrences of `marker` in `text` bounded on both sides
/// by a non-word character (ASCII letters, digits and '_' are word
/// characters) or the end of the text.
std::size_t count_marker(std::string_view text, std::string_view marker);

using MarkerCounts = std::vector<std::pair<std::string, std::size_t>>;

/// Per-marker totals over the corpus, in the order of `markers`.
MarkerCounts marker_stats(std::span<const std::string> corpus, std::span<const std::string> markers = kDefaultMarkers);

}  // namespace thinkstage::cot
