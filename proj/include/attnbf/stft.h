// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "attnbf/fft.h"

namespace attnbf {

using Signal = std::vector<double>;
// One Signal per channel, all of equal length.
using MultiSignal = std::vector<Signal>;

enum class WindowKind { kHann };

struct StftConfig {
  int window_len = 1024;
  int hop = 256;
  WindowKind window_kind = WindowKind::kHann;
  int sample_rate = 16000;

  int num_bins() const { return window_len / 2 + 1; }
  // Zero samples prepended (and appended) to the signal before framing.
  int edge_padding() const { return window_len - hop; }
  int num_frames(std::size_t num_samples) const {
    return static_cast<int>((num_samples + hop - 1) / hop);
  }
  // Throws ConfigError unless window_len is a power of two, hop divides it and
  // hop <= window_len / 2.
  void validate() const;
};

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

// One-sided multichannel spectrogram, indexed (channel, bin, frame).
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(int channels, int frames, const StftConfig& cfg, std::size_t num_samples);

  int channels() const { return channels_; }
  int bins() const { return bins_; }
  int frames() const { return frames_; }
  const StftConfig& config() const { return cfg_; }
  // Length of the time-domain signal this spectrogram describes.
  std::size_t num_samples() const { return num_samples_; }

  cplx& operator()(int m, int f, int t) { return data_[index(m, f, t)]; }
  const cplx& operator()(int m, int f, int t) const { return data_[index(m, f, t)]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  bool same_shape(const Spectrogram& other) const {
    return channels_ == other.channels_ && bins_ == other.bins_ && frames_ == other.frames_;
  }

  Spectrogram channel(int m) const;
  // First `frames` frames; num_samples shrinks to frames * hop.
  Spectrogram leading_frames(int frames) const;

 private:
  std::size_t index(int m, int f, int t) const {
    return (static_cast<std::size_t>(m) * bins_ + f) * frames_ + t;
  }

  int channels_ = 0;
  int bins_ = 0;
  int frames_ = 0;
  StftConfig cfg_;
  std::size_t num_samples_ = 0;
  std::vector<cplx> data_;
};

// Frame t covers padded samples [t*hop, t*hop + window_len) where the signal is
// preceded by edge_padding() zeros; T = ceil(num_samples / hop).
Spectrogram analyze(const MultiSignal& signal, const StftConfig& cfg);

// Weighted overlap-add with the analysis window, normalized by the summed
// squared window. Returns spec.num_samples() samples per channel.
MultiSignal synthesize(const Spectrogram& spec);

// Sample range [begin, end) where every overlapping frame is present, i.e. the
// region where round-trip reconstruction is guaranteed.
std::pair<std::size_t, std::size_t> interior_range(std::size_t num_samples, const StftConfig& cfg);

// Per-sample synthesis normalizer sum_t w^2(n + P - t*hop) for T frames.
std::vector<double> synthesis_normalizer(std::size_t num_samples, const StftConfig& cfg);

}  // namespace attnbf
