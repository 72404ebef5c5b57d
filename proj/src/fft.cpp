// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "attnbf/error.h"

namespace attnbf {

struct RealFft::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
  // FFTW's planner is not re-entrant.
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
};

namespace {

std::shared_ptr<const RealFft::Plans> plans_for(int n) {
  static std::mutex cache_mutex;
  static std::map<int, std::shared_ptr<const RealFft::Plans>> cache;
  std::lock_guard<std::mutex> cache_lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  auto plans = std::make_shared<RealFft::Plans>();
  {
    std::lock_guard<std::mutex> lock(RealFft::Plans::planner_mutex());
    std::vector<double> real(static_cast<std::size_t>(n));
    std::vector<cplx> spec(static_cast<std::size_t>(n / 2 + 1));
    auto* c = reinterpret_cast<fftw_complex*>(spec.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plans->r2c = fftw_plan_dft_r2c_1d(n, real.data(), c, flags);
    plans->c2r = fftw_plan_dft_c2r_1d(n, c, real.data(), flags | FFTW_DESTROY_INPUT);
  }
  if (!plans->r2c || !plans->c2r) throw ConfigError("FFTW could not plan length " + std::to_string(n));
  cache.emplace(n, plans);
  return plans;
}

}  // namespace

RealFft::RealFft(int n) : n_(n) {
  if (n < 1) throw ConfigError("FFT length must be positive");
  plans_ = plans_for(n);
}

void RealFft::forward(std::span<const double> in, std::span<cplx> out) const {
  if (in.size() != static_cast<std::size_t>(n_) || out.size() != static_cast<std::size_t>(num_bins()))
    throw InvalidInput("RealFft::forward size mismatch");
  // r2c plans leave their input intact.
  fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const cplx> in, std::span<double> out) const {
  if (in.size() != static_cast<std::size_t>(num_bins()) || out.size() != static_cast<std::size_t>(n_))
    throw InvalidInput("RealFft::inverse size mismatch");
  std::vector<cplx> scratch(in.begin(), in.end());
  scratch.front().imag(0.0);
  if (n_ % 2 == 0) scratch.back().imag(0.0);
  fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
  const double scale = 1.0 / n_;
  for (double& v : out) v *= scale;
}

int fft_friendly_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  const int n = fft_friendly_size(static_cast<int>(out_len));
  RealFft fft(n);
  std::vector<double> pa(static_cast<std::size_t>(n), 0.0), pb(static_cast<std::size_t>(n), 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  std::vector<cplx> fa(static_cast<std::size_t>(fft.num_bins())), fb(fa.size());
  fft.forward(pa, fa);
  fft.forward(pb, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.inverse(fa, pa);
  pa.resize(out_len);
  return pa;
}

}  // namespace attnbf
