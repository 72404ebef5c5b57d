// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace attnbf {

using cplx = std::complex<double>;

// Real-input FFT of fixed length backed by FFTW. Plans are cached per length
// and shared; transforms may run concurrently from several threads.
class RealFft {
 public:
  explicit RealFft(int n);

  int size() const { return n_; }
  int num_bins() const { return n_ / 2 + 1; }

  // out[k] = sum_n in[n] exp(-2 pi i k n / N), k = 0..N/2
  void forward(std::span<const double> in, std::span<cplx> out) const;
  // Inverse of forward (includes the 1/N factor). Imaginary parts of the DC
  // and Nyquist bins are ignored.
  void inverse(std::span<const cplx> in, std::span<double> out) const;

  struct Plans;

 private:
  int n_;
  std::shared_ptr<const Plans> plans_;
};

// Smallest length >= n of the form 2^a 3^b 5^c, for fast FFT convolution.
int fft_friendly_size(int n);

// Full linear convolution (length a.size() + b.size() - 1) via FFT.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

}  // namespace attnbf
