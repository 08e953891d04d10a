#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>

#include "metahom/geometry.hpp"

namespace metahom {

// MHVX binary layout (all integers little-endian), documented in docs/voxel_format.md:
//   bytes 0..3   magic "MHVX"
//   bytes 4..5   u16 version: 1 = label mask, 2 = complex field
//   bytes 6..9   u32 n
//   bytes 10..15 reserved; for version 2, byte 10 = component count,
//                byte 11 = FieldLocation, remaining bytes zero
// Version 1 payload: n^3 label bytes, x fastest.
// Version 2 payload: components x n^3 complex values, each two f64 (re, im),
//                    component-major, x fastest within a component.

enum class FieldLocation : std::uint8_t { nodes = 0, edges = 1, faces = 2, cells = 3 };

inline constexpr std::size_t kVoxelHeaderBytes = 16;

void write_mask(const std::string& path, const VoxelMask& mask);
VoxelMask read_mask(const std::string& path);

void write_field(const std::string& path, int n, int components, FieldLocation location,
                 std::span<const std::complex<double>> values);

struct FieldFile {
  int n = 0;
  int components = 0;
  FieldLocation location = FieldLocation::nodes;
  std::vector<std::complex<double>> values;
};
FieldFile read_field(const std::string& path);

}  // namespace metahom
