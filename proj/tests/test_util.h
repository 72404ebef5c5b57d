// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <random>
#include <vector>

#include "attnbf/linalg.h"
#include "attnbf/stft.h"

namespace attnbf::testing {

inline MultiSignal random_signal(int channels, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  MultiSignal x(static_cast<std::size_t>(channels), Signal(samples));
  for (auto& ch : x)
    for (double& v : ch) v = dist(rng);
  return x;
}

inline std::vector<cplx> random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  std::vector<cplx> v(static_cast<std::size_t>(n));
  for (auto& z : v) z = cplx(dist(rng), dist(rng));
  return v;
}

inline CMat random_matrix(int n, std::mt19937_64& rng) {
  CMat a(n, n);
  auto v = random_vector(n * n, rng);
  std::copy(v.begin(), v.end(), a.data().begin());
  return a;
}

// A A^H + n I, Hermitian positive definite.
inline CMat random_pd(int n, std::mt19937_64& rng) {
  CMat a = random_matrix(n, rng);
  CMat p = a * a.adjoint();
  for (int i = 0; i < n; ++i) p(i, i) += static_cast<double>(n);
  return p;
}

inline CMat random_hermitian(int n, std::mt19937_64& rng) {
  CMat a = random_matrix(n, rng);
  return (a + a.adjoint()) * cplx(0.5);
}

inline CMat outer(const std::vector<cplx>& v) {
  const int n = static_cast<int>(v.size());
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = v[i] * std::conj(v[j]);
  return m;
}

}  // namespace attnbf::testing
