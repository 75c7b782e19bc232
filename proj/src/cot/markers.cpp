#include "thinkstage/cot/markers.hpp"

#include "thinkstage/reward.hpp"

namespace thinkstage::cot {

namespace {

bool word_char(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') || u == '_';
}

}  // namespace

std::size_t count_marker(std::string_view text, std::string_view marker) {
  if (marker.empty()) return 0;
  const std::string hay = to_lower_ascii(text);
  const std::string needle = to_lower_ascii(marker);
  std::size_t n = 0;
  for (std::size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) {
    const bool left = p == 0 || !word_char(hay[p - 1]);
    const std::size_t end = p + needle.size();
    const bool right = end == hay.size() || !word_char(hay[end]);
    if (left && right) ++n;
  }
  return n;
}

MarkerCounts marker_stats(std::span<const std::string> corpus, std::span<const std::string> markers) {
  MarkerCounts out;
  out.reserve(markers.size());
  for (const auto& m : markers) out.emplace_back(m, 0);
  for (const auto& doc : corpus)
    for (auto& [m, c] : out) c += count_marker(doc, m);
  return out;
}

}  // namespace thinkstage::cot
