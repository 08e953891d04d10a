#include "metahom/voxel_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <fmt/format.h>

#include "metahom/error.hpp"

namespace metahom {

namespace {

constexpr std::array<char, 4> kMagic = {'M', 'H', 'V', 'X'};

template <class T>
void put_le(std::vector<char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

template <class T>
T get_le(const std::vector<char>& in, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b)
    bits |= static_cast<U>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  return std::bit_cast<T>(bits);
}

std::vector<char> header(std::uint16_t version, std::uint32_t n, std::uint8_t b10, std::uint8_t b11) {
  std::vector<char> out(kMagic.begin(), kMagic.end());
  put_le(out, version);
  put_le(out, n);
  out.push_back(static_cast<char>(b10));
  out.push_back(static_cast<char>(b11));
  out.resize(kVoxelHeaderBytes, 0);
  return out;
}

void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, fmt::format("cannot open '{}' for writing", path));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::io, fmt::format("write to '{}' failed", path));
}

std::vector<char> read_bytes(const std::string& path, std::uint16_t expected_version) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, fmt::format("cannot open '{}'", path));
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < kVoxelHeaderBytes || std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
    throw Error(ErrorCode::io, fmt::format("'{}' is not an MHVX file", path));
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != expected_version)
    throw Error(ErrorCode::io, fmt::format("'{}' has MHVX version {}, expected {}", path, version, expected_version));
  return bytes;
}

}  // namespace

void write_mask(const std::string& path, const VoxelMask& mask) {
  auto bytes = header(1, static_cast<std::uint32_t>(mask.n()), 0, 0);
  bytes.insert(bytes.end(), mask.raw().begin(), mask.raw().end());
  write_bytes(path, bytes);
}

VoxelMask read_mask(const std::string& path) {
  const auto bytes = read_bytes(path, 1);
  const auto n = get_le<std::uint32_t>(bytes, 6);
  if (n == 0 || n > 4096) throw Error(ErrorCode::io, fmt::format("'{}': implausible grid size {}", path, n));
  VoxelMask mask(static_cast<int>(n));
  if (bytes.size() != kVoxelHeaderBytes + mask.size())
    throw Error(ErrorCode::io, fmt::format("'{}': expected {} payload bytes, found {}", path, mask.size(),
                                           bytes.size() - kVoxelHeaderBytes));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(bytes[kVoxelHeaderBytes + i]);
    if (v > 4) throw Error(ErrorCode::io, fmt::format("'{}': invalid label {} at voxel {}", path, v, i));
    mask.raw()[i] = v;
  }
  return mask;
}

void write_field(const std::string& path, int n, int components, FieldLocation location,
                 std::span<const std::complex<double>> values) {
  const std::size_t expected = static_cast<std::size_t>(components) * n * n * n;
  if (values.size() != expected)
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("field has {} values, expected {} for n={} and {} component(s)", values.size(),
                            expected, n, components));
  auto bytes = header(2, static_cast<std::uint32_t>(n), static_cast<std::uint8_t>(components),
                      static_cast<std::uint8_t>(location));
  bytes.reserve(bytes.size() + 16 * values.size());
  for (const auto& z : values) {
    put_le(bytes, z.real());
    put_le(bytes, z.imag());
  }
  write_bytes(path, bytes);
}

FieldFile read_field(const std::string& path) {
  const auto bytes = read_bytes(path, 2);
  FieldFile out;
  out.n = static_cast<int>(get_le<std::uint32_t>(bytes, 6));
  out.components = static_cast<unsigned char>(bytes[10]);
  out.location = static_cast<FieldLocation>(bytes[11]);
  const std::size_t count = static_cast<std::size_t>(out.components) * out.n * out.n * out.n;
  if (bytes.size() != kVoxelHeaderBytes + 16 * count)
    throw Error(ErrorCode::io, fmt::format("'{}': payload size mismatch", path));
  out.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    out.values[i] = {get_le<double>(bytes, kVoxelHeaderBytes + 16 * i),
                     get_le<double>(bytes, kVoxelHeaderBytes + 16 * i + 8)};
  return out;
}

}  // namespace metahom
