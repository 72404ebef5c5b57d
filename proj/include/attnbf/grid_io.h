// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace attnbf {

// Debug dump format: 16-byte little-endian header (magic, version, rows,
// cols as u32) followed by rows*cols float32 values in row-major order.
struct Grid {
  static constexpr std::uint32_t kMagic = 0x47464241;  // "ABFG"
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;
};

void write_grid(const std::string& path, const Grid& grid);
Grid read_grid(const std::string& path);

}  // namespace attnbf
