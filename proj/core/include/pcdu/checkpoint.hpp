#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pcdu/config.hpp"
#include "pcdu/tensor.hpp"

namespace pcdu {

inline constexpr char kCheckpointMagic[4] = {'P', 'C', 'D', 'U'};
/// Version 1 stores 32-bit reals, version 2 stores 64-bit reals.
inline constexpr std::uint32_t kCheckpointVersionF32 = 1;
inline constexpr std::uint32_t kCheckpointVersionF64 = 2;
inline constexpr std::uint32_t kCheckpointNativeVersion =
    sizeof(Real) == 4 ? kCheckpointVersionF32 : kCheckpointVersionF64;

/// Named tensors plus a footer with the run's config hash and epoch.
///
/// Layout (little-endian): "PCDU", u32 version, u32 tensor count; per tensor
/// u16 name length, UTF-8 name, u8 rank, u32 per dimension, then row-major
/// reals; footer: 32-byte config hash, u32 epoch.
struct Checkpoint {
  std::uint32_t version = kCheckpointNativeVersion;
  std::vector<std::pair<std::string, Tensor>> tensors;
  ConfigHash config_hash{};
  std::uint32_t epoch = 0;

  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  void put(std::string name, Tensor tensor);

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pcdu
