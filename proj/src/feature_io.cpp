#include "emi/feature_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

static_assert(std::endian::native == std::endian::little, "EMIF I/O assumes a little-endian host");

namespace emi {

namespace {

void put_u32(std::vector<char>& out, std::uint32_t v) {
  char raw[4];
  std::memcpy(raw, &v, 4);
  out.insert(out.end(), raw, raw + 4);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

}  // namespace

std::vector<char> encode_feature(const Tensor<float>& tensor) {
  const Shape& shape = tensor.shape();
  if (shape.size() > 255) throw FormatError("EMIF: rank " + std::to_string(shape.size()) + " exceeds 255");
  std::vector<char> out;
  out.reserve(emif::kHeaderBytes + 4 * shape.size() + 4 * tensor.size());
  out.insert(out.end(), emif::kMagic, emif::kMagic + 4);
  out.push_back(static_cast<char>(emif::kVersion));
  out.push_back(static_cast<char>(emif::kDtypeF32));
  out.push_back(static_cast<char>(shape.size()));
  out.push_back(0);
  for (std::size_t d : shape) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw FormatError("EMIF: dimension exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  const auto* payload = reinterpret_cast<const char*>(tensor.value().data());
  out.insert(out.end(), payload, payload + sizeof(float) * tensor.size());
  return out;
}

Tensor<float> decode_feature(const char* bytes, std::size_t length, const std::string& origin) {
  auto fail = [&](const std::string& field, const std::string& what) -> FormatError {
    return FormatError(origin + ": bad " + field + ": " + what);
  };
  if (length < emif::kHeaderBytes) throw fail("header", "file is " + std::to_string(length) + " bytes");
  if (std::memcmp(bytes, emif::kMagic, 4) != 0) throw fail("magic", "expected \"EMIF\"");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  const auto dtype = static_cast<std::uint8_t>(bytes[5]);
  const auto rank = static_cast<std::uint8_t>(bytes[6]);
  const auto reserved = static_cast<std::uint8_t>(bytes[7]);
  if (version != emif::kVersion) throw fail("version", std::to_string(version));
  if (dtype != emif::kDtypeF32) throw fail("dtype", std::to_string(dtype) + " (only f32 = 1 is supported)");
  if (reserved != 0) throw fail("reserved", "byte must be 0");

  const std::size_t dims_end = emif::kHeaderBytes + 4 * std::size_t{rank};
  if (length < dims_end) throw fail("dims", "truncated dimension list");
  Shape shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(bytes + emif::kHeaderBytes + 4 * i);
    if (shape[i] == 0) throw fail("dims", "dimension " + std::to_string(i) + " is zero");
    if (__builtin_mul_overflow(count, shape[i], &count) ||
        count > std::numeric_limits<std::size_t>::max() / sizeof(float)) {
      throw fail("dims", "dimension product overflows");
    }
  }
  const std::size_t payload = length - dims_end;
  if (payload != count * sizeof(float)) {
    throw fail("payload", "expected " + std::to_string(count * sizeof(float)) + " bytes for shape " +
                              to_string(shape) + ", found " + std::to_string(payload));
  }
  Matrix<float> value(storage_rows(shape), storage_cols(shape));
  std::memcpy(value.data(), bytes + dims_end, payload);
  return Tensor<float>(std::move(shape), std::move(value));
}

std::vector<char> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_binary(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

void write_feature_file(const std::filesystem::path& path, const Tensor<float>& tensor) {
  write_binary(path, encode_feature(tensor));
}

Tensor<float> read_feature_file(const std::filesystem::path& path) {
  const auto bytes = read_binary(path);
  return decode_feature(bytes.data(), bytes.size(), path.string());
}

}  // namespace emi
