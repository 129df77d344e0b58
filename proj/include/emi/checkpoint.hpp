#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "emi/trainer.hpp"

namespace emi {

/// Archive layout (little-endian):
///   "EMIC" | version u32 | index length u64 | JSON index | EMIF tensor blobs
/// Tensor offsets in the index are relative to the first blob.
namespace emic {
inline constexpr char kMagic[4] = {'E', 'M', 'I', 'C'};
inline constexpr std::uint32_t kVersion = 1;
}  // namespace emic

struct CheckpointMeta {
  std::string config_hash;
  std::string rng_state;
  std::size_t best_epoch = 0;
  double best_valid = 0;
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
};

std::vector<char> encode_checkpoint(const Model& model, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& origin);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace emi
