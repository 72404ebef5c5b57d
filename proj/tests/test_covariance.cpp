// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "attnbf/covariance.h"
#include "attnbf/error.h"
#include "test_util.h"

using namespace attnbf;

namespace {

ScmSequence random_iscms(int bins, int frames, int mics, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ScmSequence s(bins, frames, mics);
  for (int f = 0; f < bins; ++f)
    for (int t = 0; t < frames; ++t) s.set(f, t, iscm(testing::random_vector(mics, rng)));
  return s;
}

ScmSequence scalar_sequence(const std::vector<double>& v) {
  ScmSequence s(1, static_cast<int>(v.size()), 1);
  for (std::size_t t = 0; t < v.size(); ++t) s(0, static_cast<int>(t), 0, 0) = v[t];
  return s;
}

std::vector<double> scalars(const ScmSequence& s) {
  std::vector<double> out;
  for (int t = 0; t < s.frames(); ++t) out.push_back(s(0, t, 0, 0).real());
  return out;
}

double max_diff(const CMat& a, const CMat& b) { return (a - b).max_abs(); }

}  // namespace

TEST_CASE("covariance: iscm is the outer product") {
  const CMat a = iscm(std::vector<cplx>{1.0, cplx(0, 1)});
  CHECK(a(0, 0) == cplx(1, 0));
  CHECK(a(0, 1) == cplx(0, -1));
  CHECK(a(1, 0) == cplx(0, 1));
  CHECK(a(1, 1) == cplx(1, 0));
  CHECK(iscm(std::vector<cplx>(3, 0.0)).max_abs() == 0.0);
}

TEST_CASE("covariance: random iscm has trace ||v||^2 and a single nonzero eigenvalue") {
  std::mt19937_64 rng(4);
  const auto v = testing::random_vector(5, rng);
  const CMat a = iscm(v);
  double norm2 = 0.0;
  for (auto z : v) norm2 += std::norm(z);
  CHECK(a.trace().real() == doctest::Approx(norm2));
  Eigen::MatrixXcd e(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) e(i, j) = a(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(e);
  const auto ev = solver.eigenvalues();
  CHECK(ev(4) == doctest::Approx(norm2));
  for (int i = 0; i < 4; ++i) CHECK(std::abs(ev(i)) < 1e-10 * norm2);
}

TEST_CASE("covariance: scalar examples of the three estimators") {
  auto cum = scalars(cum_avg(scalar_sequence({1, 2, 3})));
  CHECK(cum[0] == doctest::Approx(1.0));
  CHECK(cum[1] == doctest::Approx(1.5));
  CHECK(cum[2] == doctest::Approx(2.0));

  auto rec = scalars(rec_avg(scalar_sequence({1, 1, 1, 1}), 0.5));
  CHECK(rec[0] == doctest::Approx(1.0));
  CHECK(rec[1] == doctest::Approx(1.5));
  CHECK(rec[2] == doctest::Approx(1.75));
  CHECK(rec[3] == doctest::Approx(1.875));
  CHECK(scalars(rec_avg(scalar_sequence({4}), 0.3))[0] == 4.0);

  auto block = scalars(block_avg(scalar_sequence({1, 2, 3, 4}), 2));
  CHECK(block == std::vector<double>{1.0, 1.5, 2.5, 3.5});

  auto constant = scalars(cum_avg(scalar_sequence({7, 7, 7, 7})));
  for (double v : constant) CHECK(v == doctest::Approx(7.0));
}

TEST_CASE("covariance: estimators match brute-force sums on random sequences") {
  const auto psi = random_iscms(3, 40, 4, 11);
  const auto cum = cum_avg(psi);
  const auto rec = rec_avg(psi, 0.95);
  const auto block = block_avg(psi, 25);
  for (int f = 0; f < 3; ++f)
    for (int t = 0; t < 40; ++t) {
      CMat sum(4, 4), geo(4, 4), win(4, 4);
      int count = 0;
      for (int tau = 0; tau <= t; ++tau) {
        sum = sum + psi.at(f, tau);
        geo = geo + psi.at(f, tau) * cplx(std::pow(0.95, t - tau));
        if (tau > t - 25) {
          win = win + psi.at(f, tau);
          ++count;
        }
      }
      CHECK(max_diff(cum.at(f, t), sum * cplx(1.0 / (t + 1))) < 1e-10 * sum.max_abs());
      CHECK(max_diff(rec.at(f, t), geo) < 1e-10 * geo.max_abs());
      CHECK(max_diff(block.at(f, t), win * cplx(1.0 / count)) < 1e-10 * win.max_abs());
    }
}

TEST_CASE("covariance: block window covering everything equals cum_avg") {
  const auto psi = random_iscms(2, 12, 3, 12);
  const auto a = cum_avg(psi), b = block_avg(psi, 12), c = block_avg(psi, 100);
  for (int f = 0; f < 2; ++f)
    for (int t = 0; t < 12; ++t) {
      CHECK(max_diff(a.at(f, t), b.at(f, t)) < 1e-12);
      CHECK(max_diff(a.at(f, t), c.at(f, t)) < 1e-12);
    }
}

TEST_CASE("covariance: estimators are causal") {
  const auto psi = random_iscms(2, 30, 3, 13);
  auto perturbed = psi;
  std::mt19937_64 rng(99);
  for (int f = 0; f < 2; ++f)
    for (int t = 18; t < 30; ++t) perturbed.set(f, t, iscm(testing::random_vector(3, rng)));
  for (auto est : {+[](const ScmSequence& s) { return cum_avg(s); }, +[](const ScmSequence& s) { return rec_avg(s); },
                   +[](const ScmSequence& s) { return block_avg(s, 5); }}) {
    const auto a = est(psi), b = est(perturbed);
    for (int f = 0; f < 2; ++f)
      for (int t = 0; t < 18; ++t)
        for (int k = 0; k < 9; ++k) CHECK(a.slice(f, t)[k] == b.slice(f, t)[k]);
  }
}

TEST_CASE("covariance: estimators keep Hermitian PSD structure") {
  const auto psi = random_iscms(2, 20, 4, 14);
  for (const auto& s : {cum_avg(psi), rec_avg(psi), block_avg(psi, 6)})
    for (int f = 0; f < 2; ++f)
      for (int t = 0; t < 20; ++t) {
        const CMat a = s.at(f, t);
        CHECK(hermitian_deviation(a) < 1e-12 * a.max_abs());
        Eigen::MatrixXcd e(4, 4);
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) e(i, j) = a(i, j);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(e);
        CHECK(solver.eigenvalues().minCoeff() > -1e-10 * a.max_abs());
      }
}

TEST_CASE("covariance: invalid estimator parameters") {
  const auto psi = random_iscms(1, 3, 2, 15);
  CHECK_THROWS_AS(rec_avg(psi, 0.0), ConfigError);
  CHECK_THROWS_AS(rec_avg(psi, 1.0), ConfigError);
  CHECK_THROWS_AS(block_avg(psi, 0), ConfigError);
}

TEST_CASE("covariance: compact and expand Hermitian examples") {
  CHECK(compact_dim(2) == 4);
  CHECK(compact_dim(5) == 25);
  CHECK(compact_hermitian(CMat::identity(2)) == std::vector<double>{1, 1, 0, 0});
  CMat a(2, 2);
  a(0, 0) = 1;
  a(0, 1) = cplx(0, -1);
  a(1, 0) = cplx(0, 1);
  a(1, 1) = 1;
  CHECK(compact_hermitian(a) == std::vector<double>{1, 1, 0, 1});
  CHECK(max_diff(expand_hermitian(std::vector<double>{1, 1, 0, 0}, 2), CMat::identity(2)) == 0.0);
  const CMat b = expand_hermitian(std::vector<double>{0, 0, 3, -4}, 2);
  CHECK(b(0, 1) == cplx(3, 4));
  CHECK(b(1, 0) == cplx(3, -4));
  CHECK(b(0, 0) == cplx(0));

  CMat skew(2, 2);
  skew(0, 1) = 1.0;
  CHECK_THROWS_AS(compact_hermitian(skew), InvalidInput);
  CHECK_THROWS_AS(expand_hermitian(std::vector<double>{1, 2, 3}, 2), InvalidInput);
}

TEST_CASE("covariance: compaction and vectorization round-trip exactly") {
  std::mt19937_64 rng(16);
  for (int m = 2; m <= 5; ++m) {
    const CMat h = testing::random_hermitian(m, rng);
    CHECK(max_diff(expand_hermitian(compact_hermitian(h), m), h) == 0.0);
  }
  for (auto mode : {Vectorization::kCompact, Vectorization::kFull}) {
    ScmSequence s(4, 3, 3);
    for (int f = 0; f < 4; ++f)
      for (int t = 0; t < 3; ++t) s.set(f, t, testing::random_hermitian(3, rng));
    const auto v = vectorize_scm(s, 1, mode);
    CHECK(v.size() == std::size_t(4 * vector_dim(3, mode)));
    const auto back = devectorize_scm(v, 3, 4, mode);
    for (int f = 0; f < 4; ++f) CHECK(max_diff(back[f], s.at(f, 1)) == 0.0);
    const auto frames = vectorize_frames(s, mode);
    CHECK(std::vector<double>(frames.begin() + v.size(), frames.begin() + 2 * v.size()) == v);
  }
  ScmSequence one(1, 1, 3);
  one.set(0, 0, testing::random_hermitian(3, rng));
  CHECK(vectorize_scm(one, 0) == compact_hermitian(one.at(0, 0)));
  CHECK_THROWS_AS(devectorize_scm(std::vector<double>(7), 3, 1), InvalidInput);
}
