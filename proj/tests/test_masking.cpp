// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "attnbf/error.h"
#include "attnbf/grid_io.h"
#include "attnbf/masking.h"
#include "test_util.h"

using namespace attnbf;

namespace {

Spectrogram small_spec(int channels, std::uint64_t seed) {
  StftConfig cfg;
  cfg.window_len = 16;
  cfg.hop = 4;
  return analyze(testing::random_signal(channels, 64, seed), cfg);
}

}  // namespace

TEST_CASE("masking: oracle mask corner cases") {
  const auto y = small_spec(1, 1);
  auto ones = oracle_mask(y, y);
  for (double v : ones.values()) CHECK(v == doctest::Approx(1.0));

  Spectrogram zero(1, y.frames(), y.config(), y.num_samples());
  auto zeros = oracle_mask(zero, y);
  for (double v : zeros.values()) CHECK(v == 0.0);

  Spectrogram x = zero, mix = zero;
  x(0, 3, 2) = cplx(0.3, 0.0);
  mix(0, 3, 2) = cplx(0.0, 0.6);
  CHECK(oracle_mask(x, mix)(3, 2) == doctest::Approx(0.5));
}

TEST_CASE("masking: oracle mask stays in [0, 1] including silent mixture bins") {
  const auto x = small_spec(1, 2);
  Spectrogram y = small_spec(1, 3);
  y(0, 0, 0) = 0.0;
  auto m = oracle_mask(x, y);
  for (double v : m.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(m(0, 0) == 1.0);
  CHECK_THROWS_AS(oracle_mask(x, x.leading_frames(3)), InvalidInput);
}

TEST_CASE("masking: apply_mask scales every channel") {
  const auto y = small_spec(5, 5);
  auto same = apply_mask(y, Mask(y.bins(), y.frames(), 1.0));
  auto none = apply_mask(y, Mask(y.bins(), y.frames(), 0.0));
  auto half = apply_mask(y, Mask(y.bins(), y.frames(), 0.5));
  for (std::size_t i = 0; i < y.data().size(); ++i) {
    CHECK(same.data()[i] == y.data()[i]);
    CHECK(none.data()[i] == cplx(0.0));
    CHECK(half.data()[i] == 0.5 * y.data()[i]);
  }
  CHECK_THROWS_AS(apply_mask(y, Mask(y.bins() + 1, y.frames(), 1.0)), InvalidInput);
}

TEST_CASE("masking: complementary masks split the mixture exactly") {
  const auto y = small_spec(3, 6);
  Mask m(y.bins(), y.frames());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int f = 0; f < m.bins(); ++f)
    for (int t = 0; t < m.frames(); ++t) m(f, t) = u(rng);

  auto c = complementary_mask(m);
  auto cc = complementary_mask(c);
  for (std::size_t i = 0; i < m.values().size(); ++i) {
    CHECK(c.values()[i] == doctest::Approx(1.0 - m.values()[i]));
    CHECK(cc.values()[i] == doctest::Approx(m.values()[i]));
  }
  CHECK(complementary_mask(Mask(2, 2, 0.25)).values()[0] == 0.75);

  auto pair = split_with_mask(y, m);
  for (std::size_t i = 0; i < y.data().size(); ++i)
    CHECK(std::abs(pair.speech_est.data()[i] + pair.noise_est.data()[i] - y.data()[i]) < 1e-14);
}

TEST_CASE("masking: apply_mask commutes with channel permutation") {
  const auto y = small_spec(3, 8);
  Mask m(y.bins(), y.frames(), 0.3);
  m(2, 1) = 0.9;
  Spectrogram perm(3, y.frames(), y.config(), y.num_samples());
  const int order[3] = {2, 0, 1};
  for (int c = 0; c < 3; ++c)
    for (int f = 0; f < y.bins(); ++f)
      for (int t = 0; t < y.frames(); ++t) perm(c, f, t) = y(order[c], f, t);
  auto a = apply_mask(y, m), b = apply_mask(perm, m);
  for (int c = 0; c < 3; ++c)
    for (int f = 0; f < y.bins(); ++f)
      for (int t = 0; t < y.frames(); ++t) CHECK(b(c, f, t) == a(order[c], f, t));
}

TEST_CASE("masking: masks round-trip through the grid format and providers") {
  const auto y = small_spec(2, 10);
  const auto clean = small_spec(1, 11);
  auto m = oracle_mask(clean, y.channel(0));
  const auto path = (std::filesystem::temp_directory_path() / "attnbf_mask_test.grid").string();
  write_grid(path, m.to_grid());
  GridMaskProvider provider(path);
  auto back = provider.estimate(y);
  for (std::size_t i = 0; i < m.values().size(); ++i)
    CHECK(back.values()[i] == doctest::Approx(m.values()[i]).epsilon(1e-6));
  OracleMaskProvider oracle(clean);
  CHECK(oracle.estimate(y).values() == m.values());
  std::remove(path.c_str());

  Mask bad(2, 2, 0.5);
  bad(1, 1) = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}
