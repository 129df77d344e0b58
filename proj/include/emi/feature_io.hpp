#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emi/tensor.hpp"

namespace emi {

/// Binary tensor container used for every feature file.
///
/// Little-endian layout:
///   "EMIF" | version u8 = 1 | dtype u8 = 1 (f32) | rank u8 | reserved u8 = 0
///   | rank x u32 dims | row-major f32 payload
namespace emif {
inline constexpr char kMagic[4] = {'E', 'M', 'I', 'F'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::size_t kHeaderBytes = 8;
}  // namespace emif

std::vector<char> encode_feature(const Tensor<float>& tensor);

/// Parses one EMIF blob. `origin` names the source in error messages.
Tensor<float> decode_feature(const char* bytes, std::size_t length, const std::string& origin);

void write_feature_file(const std::filesystem::path& path, const Tensor<float>& tensor);
Tensor<float> read_feature_file(const std::filesystem::path& path);

std::vector<char> read_binary(const std::filesystem::path& path);
void write_binary(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace emi
