#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mvae/network.hpp"

namespace mvae {

struct Checkpoint {
  ModelSpec spec;
  MlpParams params;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Model header: u32 d_z | u32 D | u32 hidden | u8 likelihood |
/// u8 couple_mean | u8 model | u8 reserved, followed by the 11 parameter
/// blocks in ParameterBlocks::blocks() order.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mvae
