// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "attnbf/grid_io.h"
#include "attnbf/stft.h"

namespace attnbf {

// Real-valued time-frequency gain in [0, 1], indexed (bin, frame).
class Mask {
 public:
  Mask() = default;
  Mask(int bins, int frames, double fill = 0.0);

  int bins() const { return bins_; }
  int frames() const { return frames_; }
  double& operator()(int f, int t) { return values_[static_cast<std::size_t>(f) * frames_ + t]; }
  double operator()(int f, int t) const { return values_[static_cast<std::size_t>(f) * frames_ + t]; }
  const std::vector<double>& values() const { return values_; }

  // Throws InvalidInput if any entry is non-finite or outside [0, 1].
  void validate() const;

  Grid to_grid() const;
  static Mask from_grid(const Grid& grid);

 private:
  int bins_ = 0;
  int frames_ = 0;
  std::vector<double> values_;
};

struct MaskedPair {
  Spectrogram speech_est;
  Spectrogram noise_est;
};

// Ideal amplitude mask clamp(|X| / max(|Y|, 1e-12), 0, 1) on single-channel
// spectrograms (channel 0 is used if more are present).
Mask oracle_mask(const Spectrogram& clean_ref, const Spectrogram& mixture_ref);

// out(m, f, t) = mask(f, t) * mixture(m, f, t) for every channel.
Spectrogram apply_mask(const Spectrogram& mixture, const Mask& mask);

Mask complementary_mask(const Mask& mask);

// Speech estimate with `mask`, noise estimate with its complement.
MaskedPair split_with_mask(const Spectrogram& mixture, const Mask& mask);

// Source of single-channel masks. The oracle is used in training; any learned
// single-channel separator can be plugged in at inference.
class MaskProvider {
 public:
  virtual ~MaskProvider() = default;
  // `mixture` is multichannel; implementations look at the reference channel.
  virtual Mask estimate(const Spectrogram& mixture) const = 0;
};

class OracleMaskProvider : public MaskProvider {
 public:
  explicit OracleMaskProvider(Spectrogram clean) : clean_(std::move(clean)) {}
  Mask estimate(const Spectrogram& mixture) const override;

 private:
  Spectrogram clean_;
};

// Serves a mask previously dumped with write_grid (rows = bins, cols = frames).
class GridMaskProvider : public MaskProvider {
 public:
  explicit GridMaskProvider(const std::string& path);
  Mask estimate(const Spectrogram& mixture) const override;

 private:
  Mask mask_;
};

}  // namespace attnbf
