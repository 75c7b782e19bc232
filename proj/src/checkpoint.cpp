#include "thinkstage/checkpoint.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace thinkstage {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'S', 'P', 'O', 'L', 'I', 'C', 'Y'};
constexpr std::size_t kHeaderSize = 128;

template <typename T>
void put_le(std::vector<unsigned char>& buf, std::size_t off, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[off + i] = static_cast<unsigned char>(v >> (8 * i));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

void put_text(std::vector<unsigned char>& buf, std::size_t off, std::size_t width, const std::string& s) {
  if (s.size() > width) throw CheckpointError("checkpoint header field too long: " + s);
  std::memcpy(buf.data() + off, s.data(), s.size());
}

std::string get_text(const unsigned char* p, std::size_t width) {
  std::size_t n = 0;
  while (n < width && p[n] != 0) ++n;
  return std::string(reinterpret_cast<const char*>(p), n);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TabularPolicy& policy, const CheckpointInfo& info) {
  const auto logits = policy.logits();
  std::vector<unsigned char> buf(kHeaderSize + 8 * logits.size(), 0);
  std::memcpy(buf.data(), kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(buf, 8, kCheckpointVersion);
  put_le<std::uint32_t>(buf, 12, static_cast<std::uint32_t>(policy.num_keys()));
  put_le<std::uint32_t>(buf, 16, static_cast<std::uint32_t>(policy.num_tokens()));
  put_le<std::uint32_t>(buf, 20, static_cast<std::uint32_t>(policy.eos()));
  put_le<std::uint64_t>(buf, 24, info.seed);
  put_text(buf, 32, 64, info.config_digest);
  put_text(buf, 96, 32, info.tool_version);
  for (std::size_t i = 0; i < logits.size(); ++i)
    put_le<std::uint64_t>(buf, kHeaderSize + 8 * i, std::bit_cast<std::uint64_t>(logits[i]));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

TabularPolicy load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderSize || std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0)
    throw CheckpointError(path.string() + " is not a policy checkpoint");
  if (get_le<std::uint32_t>(buf.data() + 8) != kCheckpointVersion)
    throw CheckpointError(path.string() + ": unsupported checkpoint version");
  const auto K = get_le<std::uint32_t>(buf.data() + 12);
  const auto V = get_le<std::uint32_t>(buf.data() + 16);
  const auto eos = get_le<std::uint32_t>(buf.data() + 20);
  if (K == 0 || V == 0 || eos >= V) throw CheckpointError(path.string() + ": invalid policy shape in header");
  const std::uint64_t n = std::uint64_t{K} * (std::uint64_t{V} + 1) * V;
  if (buf.size() != kHeaderSize + 8 * n) throw CheckpointError(path.string() + ": size does not match header shape");
  TabularPolicy policy(K, V, static_cast<Token>(eos));
  auto logits = policy.logits();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = std::bit_cast<double>(get_le<std::uint64_t>(buf.data() + kHeaderSize + 8 * i));
    if (!std::isfinite(logits[i])) throw CheckpointError(path.string() + ": non-finite logit");
  }
  if (info) {
    info->seed = get_le<std::uint64_t>(buf.data() + 24);
    info->config_digest = get_text(buf.data() + 32, 64);
    info->tool_version = get_text(buf.data() + 96, 32);
  }
  return policy;
}

}  // namespace thinkstage
