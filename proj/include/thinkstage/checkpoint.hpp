#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "thinkstage/policy.hpp"

namespace thinkstage {

// Policy checkpoint layout (all integers little-endian), see
// docs/checkpoint_format.md:
//
//   offset  size  field
//   0       8     magic "TSPOLICY"
//   8       4     version (1)
//   12      4     K (question keys)
//   16      4     V (next-token choices)
//   20      4     eos token id
//   24      8     seed
//   32      64    config digest, ASCII hex, NUL padded
//   96      32    tool version, ASCII, NUL padded
//   128     8*N   logits as IEEE-754 binary64, N = K * (V + 1) * V,
//                 row-major over (key, previous token, next token)

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string tool_version;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::filesystem::path& path, const TabularPolicy& policy, const CheckpointInfo& info);
TabularPolicy load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace thinkstage
