// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/stft.h"

#include <cmath>
#include <numbers>

#include "attnbf/error.h"

namespace attnbf {

void StftConfig::validate() const {
  if (window_len < 2 || (window_len & (window_len - 1)) != 0)
    throw ConfigError("window_len must be a power of two >= 2");
  if (hop < 1 || window_len % hop != 0) throw ConfigError("hop must divide window_len");
  if (hop > window_len / 2) throw ConfigError("hop must be <= window_len / 2");
  if (sample_rate < 1) throw ConfigError("sample_rate must be positive");
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / n);
  return w;
}

Spectrogram::Spectrogram(int channels, int frames, const StftConfig& cfg, std::size_t num_samples)
    : channels_(channels),
      bins_(cfg.num_bins()),
      frames_(frames),
      cfg_(cfg),
      num_samples_(num_samples),
      data_(static_cast<std::size_t>(channels) * bins_ * frames) {}

Spectrogram Spectrogram::channel(int m) const {
  if (m < 0 || m >= channels_) throw InvalidInput("channel index out of range");
  Spectrogram out(1, frames_, cfg_, num_samples_);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(index(m, 0, 0)),
            data_.begin() + static_cast<std::ptrdiff_t>(index(m, 0, 0) + std::size_t(bins_) * frames_),
            out.data_.begin());
  return out;
}

Spectrogram Spectrogram::leading_frames(int frames) const {
  if (frames < 1 || frames > frames_) throw InvalidInput("leading_frames out of range");
  Spectrogram out(channels_, frames, cfg_, static_cast<std::size_t>(frames) * cfg_.hop);
  for (int m = 0; m < channels_; ++m)
    for (int f = 0; f < bins_; ++f)
      for (int t = 0; t < frames; ++t) out(m, f, t) = (*this)(m, f, t);
  return out;
}

Spectrogram analyze(const MultiSignal& signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.empty()) throw InvalidInput("analyze: no channels");
  const std::size_t ns = signal.front().size();
  if (ns == 0) throw InvalidInput("analyze: empty signal");
  if (ns < static_cast<std::size_t>(cfg.window_len))
    throw InvalidInput("analyze: signal shorter than window_len");
  for (const auto& ch : signal) {
    if (ch.size() != ns) throw InvalidInput("analyze: channels differ in length");
    for (double v : ch)
      if (!std::isfinite(v)) throw InvalidInput("analyze: non-finite sample");
  }

  const int n = cfg.window_len;
  const int pad = cfg.edge_padding();
  const int frames = cfg.num_frames(ns);
  const auto window = hann_window(n);
  RealFft fft(n);
  Spectrogram spec(static_cast<int>(signal.size()), frames, cfg, ns);
  std::vector<double> frame(static_cast<std::size_t>(n));
  std::vector<cplx> bins(static_cast<std::size_t>(cfg.num_bins()));
  for (int m = 0; m < spec.channels(); ++m) {
    const auto& x = signal[m];
    for (int t = 0; t < frames; ++t) {
      const long start = static_cast<long>(t) * cfg.hop - pad;
      for (int k = 0; k < n; ++k) {
        const long i = start + k;
        frame[k] = (i >= 0 && i < static_cast<long>(ns)) ? x[i] * window[k] : 0.0;
      }
      fft.forward(frame, bins);
      for (int f = 0; f < spec.bins(); ++f) spec(m, f, t) = bins[f];
    }
  }
  return spec;
}

std::vector<double> synthesis_normalizer(std::size_t num_samples, const StftConfig& cfg) {
  const int n = cfg.window_len;
  const int pad = cfg.edge_padding();
  const int frames = cfg.num_frames(num_samples);
  const auto window = hann_window(n);
  std::vector<double> norm(num_samples, 0.0);
  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop - pad;
    for (int k = 0; k < n; ++k) {
      const long i = start + k;
      if (i >= 0 && i < static_cast<long>(num_samples)) norm[i] += window[k] * window[k];
    }
  }
  return norm;
}

MultiSignal synthesize(const Spectrogram& spec) {
  const StftConfig& cfg = spec.config();
  cfg.validate();
  const int n = cfg.window_len;
  const int pad = cfg.edge_padding();
  const std::size_t ns = spec.num_samples();
  if (spec.frames() != cfg.num_frames(ns)) throw InvalidInput("synthesize: frame count does not match num_samples");
  const auto window = hann_window(n);
  const auto norm = synthesis_normalizer(ns, cfg);
  RealFft fft(n);
  MultiSignal out(static_cast<std::size_t>(spec.channels()), Signal(ns, 0.0));
  std::vector<cplx> bins(static_cast<std::size_t>(spec.bins()));
  std::vector<double> frame(static_cast<std::size_t>(n));
  for (int m = 0; m < spec.channels(); ++m) {
    auto& y = out[m];
    for (int t = 0; t < spec.frames(); ++t) {
      for (int f = 0; f < spec.bins(); ++f) bins[f] = spec(m, f, t);
      fft.inverse(bins, frame);
      const long start = static_cast<long>(t) * cfg.hop - pad;
      for (int k = 0; k < n; ++k) {
        const long i = start + k;
        if (i >= 0 && i < static_cast<long>(ns)) y[i] += window[k] * frame[k];
      }
    }
    for (std::size_t i = 0; i < ns; ++i) y[i] = norm[i] > 1e-10 ? y[i] / norm[i] : 0.0;
  }
  return out;
}

std::pair<std::size_t, std::size_t> interior_range(std::size_t num_samples, const StftConfig& cfg) {
  const std::size_t frames = static_cast<std::size_t>(cfg.num_frames(num_samples));
  const std::size_t covered = frames * cfg.hop;
  const std::size_t pad = static_cast<std::size_t>(cfg.edge_padding());
  const std::size_t end = covered > pad ? std::min(num_samples, covered - pad) : 0;
  return {0, end};
}

}  // namespace attnbf
