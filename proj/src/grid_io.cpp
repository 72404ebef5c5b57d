// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/grid_io.h"

#include <bit>
#include <fstream>
#include <iterator>

#include "attnbf/error.h"

namespace attnbf {
namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace

void write_grid(const std::string& path, const Grid& grid) {
  if (grid.values.size() != std::size_t(grid.rows) * grid.cols)
    throw InvalidInput("write_grid: values do not match rows*cols");
  std::vector<unsigned char> out;
  out.reserve(16 + 4 * grid.values.size());
  put_u32(out, Grid::kMagic);
  put_u32(out, Grid::kVersion);
  put_u32(out, grid.rows);
  put_u32(out, grid.cols);
  for (float v : grid.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path);
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write failed: " + path);
}

Grid read_grid(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw IoError(path + ": truncated grid header");
  if (get_u32(bytes.data()) != Grid::kMagic) throw IoError(path + ": bad grid magic");
  if (get_u32(bytes.data() + 4) != Grid::kVersion) throw IoError(path + ": unsupported grid version");
  Grid grid;
  grid.rows = get_u32(bytes.data() + 8);
  grid.cols = get_u32(bytes.data() + 12);
  const std::size_t count = std::size_t(grid.rows) * grid.cols;
  if (bytes.size() != 16 + 4 * count) throw IoError(path + ": grid payload size mismatch");
  grid.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) grid.values[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
  return grid;
}

}  // namespace attnbf
