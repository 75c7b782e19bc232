#pragma once

#include <string>
#include <string_view>

namespace thinkstage {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

inline constexpr std::string_view kToolVersion = "thinkstage 0.1.0";

}  // namespace thinkstage
