#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "histmix/tensor.h"

namespace histmix {

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// On-disk layout, all integers and floats little-endian:
///   "HMXC" | version u8 | 3 reserved zero bytes
///   step u64 | config (u64 length + UTF-8 JSON) | rng state (u64 length + text)
///   tensor count u64, then per tensor: name (u64 length + bytes),
///   rank u64, dims u64 x rank, values f64 x numel
struct Checkpoint {
  std::uint8_t version = kCheckpointVersion;
  std::uint64_t step = 0;
  std::string config_json;
  std::string rng_state;
  std::vector<std::pair<std::string, Tensor>> tensors;

  // Throws FormatError when `name` is absent.
  const Tensor& tensor(const std::string& name) const;
  bool has(const std::string& name) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
// FormatError on a bad magic, an unknown version, truncation or trailing bytes.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace histmix
