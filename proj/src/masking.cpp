// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/masking.h"

#include <algorithm>
#include <cmath>

#include "attnbf/error.h"

namespace attnbf {

Mask::Mask(int bins, int frames, double fill)
    : bins_(bins), frames_(frames), values_(static_cast<std::size_t>(bins) * frames, fill) {}

void Mask::validate() const {
  for (double v : values_)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw InvalidInput("mask entry outside [0, 1]");
}

Grid Mask::to_grid() const {
  Grid grid;
  grid.rows = static_cast<std::uint32_t>(bins_);
  grid.cols = static_cast<std::uint32_t>(frames_);
  grid.values.assign(values_.begin(), values_.end());
  return grid;
}

Mask Mask::from_grid(const Grid& grid) {
  Mask mask(static_cast<int>(grid.rows), static_cast<int>(grid.cols));
  std::copy(grid.values.begin(), grid.values.end(), mask.values_.begin());
  mask.validate();
  return mask;
}

Mask oracle_mask(const Spectrogram& clean_ref, const Spectrogram& mixture_ref) {
  if (clean_ref.bins() != mixture_ref.bins() || clean_ref.frames() != mixture_ref.frames())
    throw InvalidInput("oracle_mask: clean and mixture shapes differ");
  constexpr double kEps = 1e-12;
  Mask mask(clean_ref.bins(), clean_ref.frames());
  for (int f = 0; f < mask.bins(); ++f)
    for (int t = 0; t < mask.frames(); ++t) {
      const double ratio = std::abs(clean_ref(0, f, t)) / std::max(std::abs(mixture_ref(0, f, t)), kEps);
      mask(f, t) = std::clamp(ratio, 0.0, 1.0);
    }
  return mask;
}

Spectrogram apply_mask(const Spectrogram& mixture, const Mask& mask) {
  if (mask.bins() != mixture.bins() || mask.frames() != mixture.frames())
    throw InvalidInput("apply_mask: mask shape does not match mixture");
  Spectrogram out = mixture;
  for (int m = 0; m < out.channels(); ++m)
    for (int f = 0; f < out.bins(); ++f)
      for (int t = 0; t < out.frames(); ++t) out(m, f, t) *= mask(f, t);
  return out;
}

Mask complementary_mask(const Mask& mask) {
  Mask out(mask.bins(), mask.frames());
  for (int f = 0; f < mask.bins(); ++f)
    for (int t = 0; t < mask.frames(); ++t) out(f, t) = 1.0 - mask(f, t);
  return out;
}

MaskedPair split_with_mask(const Spectrogram& mixture, const Mask& mask) {
  return {apply_mask(mixture, mask), apply_mask(mixture, complementary_mask(mask))};
}

Mask OracleMaskProvider::estimate(const Spectrogram& mixture) const {
  return oracle_mask(clean_, mixture);
}

GridMaskProvider::GridMaskProvider(const std::string& path) : mask_(Mask::from_grid(read_grid(path))) {}

Mask GridMaskProvider::estimate(const Spectrogram& mixture) const {
  if (mask_.bins() != mixture.bins() || mask_.frames() != mixture.frames())
    throw InvalidInput("mask file shape does not match the mixture spectrogram");
  return mask_;
}

}  // namespace attnbf
