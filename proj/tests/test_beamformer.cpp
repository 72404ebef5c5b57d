// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "attnbf/beamformer.h"
#include "attnbf/error.h"
#include "test_util.h"

using namespace attnbf;

namespace {

Eigen::MatrixXcd to_eigen(const CMat& a) {
  Eigen::MatrixXcd e(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

cplx hdot(const std::vector<cplx>& h, const std::vector<cplx>& d) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) acc += std::conj(h[i]) * d[i];
  return acc;
}

double quad(const std::vector<cplx>& h, const CMat& p) {
  cplx acc = 0.0;
  for (int i = 0; i < p.rows(); ++i)
    for (int j = 0; j < p.cols(); ++j) acc += std::conj(h[i]) * p(i, j) * h[j];
  return acc.real();
}

}  // namespace

TEST_CASE("beamformer: single channel MVDR is the identity") {
  CMat xx(1, 1), nn(1, 1);
  xx(0, 0) = 3.0;
  nn(0, 0) = 0.2;
  auto h = mvdr_weights(xx, nn, 0);
  CHECK(std::abs(h[0] - cplx(1.0)) < 1e-12);
}

TEST_CASE("beamformer: two-mic example with identity noise") {
  const std::vector<cplx> d{1.0, 1.0};
  auto h = mvdr_weights(testing::outer(d), CMat::identity(2), 0);
  CHECK(std::abs(h[0] - cplx(0.5)) < 1e-6);
  CHECK(std::abs(h[1] - cplx(0.5)) < 1e-6);
}

TEST_CASE("beamformer: distortionless response against a dense-solve oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = testing::random_vector(5, rng);
    const CMat nn = testing::random_pd(5, rng);
    const CMat xx = testing::outer(d);
    const int ref = trial % 5;
    MvdrOptions no_load;
    no_load.loading = 0.0;
    auto h = mvdr_weights(xx, nn, ref, no_load);
    CHECK(std::abs(hdot(h, d) - d[ref]) < 1e-8);

    // Oracle: w = Phi_nn^-1 Phi_xx u / tr(Phi_nn^-1 Phi_xx) via Eigen's LU.
    const Eigen::MatrixXcd x = to_eigen(nn).partialPivLu().solve(to_eigen(xx));
    const cplx tr = x.trace();
    for (int i = 0; i < 5; ++i) CHECK(std::abs(h[i] - x(i, ref) / tr) < 1e-9 * std::abs(x(i, ref) / tr) + 1e-12);

    auto loaded = mvdr_weights(xx, nn, ref);
    CHECK(std::abs(hdot(loaded, d) - d[ref]) < 1e-8);
  }
}

TEST_CASE("beamformer: MVDR output noise power is minimal among feasible filters") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = testing::random_vector(5, rng);
    const CMat nn = testing::random_pd(5, rng);
    auto h = mvdr_weights(testing::outer(d), nn, 0);
    const double best = quad(h, nn);
    double dn = 0.0;
    for (auto z : d) dn += std::norm(z);
    for (int k = 0; k < 100; ++k) {
      // g = h + z with z^H d = 0 keeps the constraint.
      auto r = testing::random_vector(5, rng);
      const cplx proj = hdot(d, r) / dn;
      std::vector<cplx> g(5);
      for (int i = 0; i < 5; ++i) g[i] = h[i] + r[i] - d[i] * proj;
      CHECK(std::abs(hdot(g, d) - d[0]) < 1e-8);
      CHECK(best <= quad(g, nn) * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("beamformer: MVDR is invariant to positive rescaling of either SCM") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> logc(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const CMat xx = testing::random_pd(5, rng);
    const CMat nn = testing::random_pd(5, rng);
    const double c = std::pow(10.0, logc(rng)), c2 = std::pow(10.0, logc(rng));
    auto a = mvdr_weights(xx, nn, 1);
    auto b = mvdr_weights(xx * cplx(c), nn * cplx(c2), 1);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
  }
}

TEST_CASE("beamformer: degenerate inputs fall back to the reference selector") {
  CMat zero(3, 3);
  auto h = mvdr_weights(zero, CMat::identity(3), 2);
  CHECK(h == std::vector<cplx>{0.0, 0.0, 1.0});
  auto h2 = mvdr_weights(CMat::identity(3), zero, 1);
  for (auto v : h2) CHECK(std::isfinite(std::abs(v)));
  CMat skew(2, 2);
  skew(0, 1) = 1.0;
  CHECK_THROWS_AS(mvdr_weights(CMat::identity(2), skew, 0), InvalidInput);
}

TEST_CASE("beamformer: IC-MVDR follows the two-product formula") {
  ScmSequence a(2, 3, 3), b(2, 3, 3);
  std::mt19937_64 rng(24);
  for (int f = 0; f < 2; ++f)
    for (int t = 0; t < 3; ++t) {
      a.set(f, t, CMat::identity(3));
      b.set(f, t, CMat::identity(3));
    }
  auto h = ic_mvdr(a, b, {1});
  for (int f = 0; f < 2; ++f)
    for (int t = 0; t < 3; ++t)
      for (int m = 0; m < 3; ++m) CHECK(h(f, t, m) == cplx(m == 1 ? 1.0 : 0.0));

  for (int f = 0; f < 2; ++f)
    for (int t = 0; t < 3; ++t) a.set(f, t, CMat::identity(3) * cplx(2.5));
  h = ic_mvdr(a, b, {0});
  CHECK(h(1, 2, 0) == cplx(2.5));

  for (int f = 0; f < 2; ++f)
    for (int t = 0; t < 3; ++t) {
      a.set(f, t, testing::random_matrix(3, rng));
      b.set(f, t, testing::random_matrix(3, rng));
    }
  h = ic_mvdr(a, b, {2});
  for (int f = 0; f < 2; ++f)
    for (int t = 0; t < 3; ++t) {
      const Eigen::VectorXcd oracle = to_eigen(a.at(f, t)) * to_eigen(b.at(f, t)).col(2);
      for (int m = 0; m < 3; ++m) CHECK(std::abs(h(f, t, m) - oracle(m)) < 1e-12);
    }
}

TEST_CASE("beamformer: apply_filter selects, zeroes and recovers rank-one speech") {
  StftConfig cfg;
  cfg.window_len = 16;
  cfg.hop = 4;
  const auto y = analyze(testing::random_signal(3, 64, 25), cfg);
  FilterField sel(y.bins(), y.frames(), 3), zero(y.bins(), y.frames(), 3);
  for (int f = 0; f < y.bins(); ++f)
    for (int t = 0; t < y.frames(); ++t) sel(f, t, 1) = 1.0;
  const auto z = apply_filter(y, sel), z0 = apply_filter(y, zero);
  for (int f = 0; f < y.bins(); ++f)
    for (int t = 0; t < y.frames(); ++t) {
      CHECK(z(0, f, t) == y(1, f, t));
      CHECK(z0(0, f, t) == cplx(0.0));
    }

  // y = d S with h = mvdr(d d^H, I): Z = d_ref S.
  std::mt19937_64 rng(26);
  const auto d = testing::random_vector(3, rng);
  const auto h = mvdr_weights(testing::outer(d), CMat::identity(3), 0, {0.0, 0.0, 1e-12});
  Spectrogram rank1(3, 4, cfg, 16);
  FilterField field(rank1.bins(), 4, 3);
  const cplx s(0.7, -1.3);
  for (int f = 0; f < rank1.bins(); ++f)
    for (int t = 0; t < 4; ++t)
      for (int m = 0; m < 3; ++m) {
        rank1(m, f, t) = d[m] * s;
        field(f, t, m) = h[m];
      }
  const auto out = apply_filter(rank1, field);
  CHECK(std::abs(out(0, 2, 1) - d[0] * s) < 1e-10);

  CHECK_THROWS_AS(apply_filter(y, FilterField(y.bins(), y.frames(), 2)), InvalidInput);
}

TEST_CASE("beamformer: apply_filter is linear in the mixture") {
  StftConfig cfg;
  cfg.window_len = 16;
  cfg.hop = 4;
  const auto a = analyze(testing::random_signal(2, 64, 27), cfg);
  const auto b = analyze(testing::random_signal(2, 64, 28), cfg);
  Spectrogram c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] = 2.0 * a.data()[i] - b.data()[i];
  std::mt19937_64 rng(29);
  FilterField h(a.bins(), a.frames(), 2);
  for (int f = 0; f < a.bins(); ++f)
    for (int t = 0; t < a.frames(); ++t) {
      auto v = testing::random_vector(2, rng);
      std::copy(v.begin(), v.end(), h.slice(f, t).begin());
    }
  const auto za = apply_filter(a, h), zb = apply_filter(b, h), zc = apply_filter(c, h);
  for (std::size_t i = 0; i < zc.data().size(); ++i)
    CHECK(std::abs(zc.data()[i] - (2.0 * za.data()[i] - zb.data()[i])) < 1e-12);
}
