// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "attnbf/autodiff.h"
#include "attnbf/error.h"
#include "attnbf/optim.h"
#include "attnbf/stft.h"
#include "gradcheck.h"

using namespace attnbf;
using ad::Tensor;
using Inputs = std::vector<Tensor>;

namespace {

constexpr double kTol = 1e-4;

double check_unary(const std::function<Tensor(const Tensor&)>& op, ad::Shape shape, double lo, double hi,
                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::gradient_error([&](const Inputs& in) { return testing::weighted_sum(op(in[0])); },
                                 {testing::random_leaf(shape, rng, lo, hi)});
}

}  // namespace

TEST_CASE("autodiff: d(x^2)/dx at 3 is 6") {
  auto x = Tensor::leaf({}, {3.0}, true);
  ad::backward(x * x);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("autodiff: linear loss gives the input as weight gradient") {
  std::mt19937_64 rng(1);
  auto w = testing::random_leaf({2, 3}, rng);
  auto x = Tensor::constant({3, 1}, {1.0, -2.0, 0.5});
  ad::backward(ad::sum(ad::matmul(w, x)));
  const std::vector<double> expected{1.0, -2.0, 0.5, 1.0, -2.0, 0.5};
  for (int i = 0; i < 6; ++i) CHECK(w.grad()[i] == doctest::Approx(expected[i]));
}

TEST_CASE("autodiff: fan-out gradients add along both paths") {
  auto x = Tensor::leaf({}, {0.7}, true);
  ad::backward(ad::exp(x) + ad::sigmoid(x) * x);
  const double s = 1.0 / (1.0 + std::exp(-0.7));
  CHECK(x.grad()[0] == doctest::Approx(std::exp(0.7) + s * (1 - s) * 0.7 + s));
}

TEST_CASE("autodiff: elementwise primitives match finite differences") {
  CHECK(check_unary([](const Tensor& a) { return ad::relu(a); }, {3, 4}, -1, 1, 2) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::sigmoid(a); }, {3, 4}, -2, 2, 3) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::exp(a); }, {3, 4}, -1, 1, 4) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::log(a); }, {3, 4}, 0.5, 2, 5) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::sqrt(a); }, {3, 4}, 0.5, 2, 6) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::power(a, 3.0); }, {3, 4}, 0.5, 2, 7) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::reciprocal(a); }, {3, 4}, 0.5, 2, 8) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::scale(a, -2.5); }, {5}, -1, 1, 9) < kTol);
  CHECK(check_unary([](const Tensor& a) { return ad::add_scalar(a, 4.0); }, {5}, -1, 1, 10) < kTol);

  std::mt19937_64 rng(11);
  for (auto op : {+[](const Tensor& a, const Tensor& b) { return ad::add(a, b); },
                  +[](const Tensor& a, const Tensor& b) { return ad::sub(a, b); },
                  +[](const Tensor& a, const Tensor& b) { return ad::mul(a, b); }}) {
    CHECK(testing::gradient_error([&](const Inputs& in) { return testing::weighted_sum(op(in[0], in[1])); },
                                  {testing::random_leaf({2, 3, 4}, rng), testing::random_leaf({2, 3, 4}, rng)}) < kTol);
    // suffix broadcast of the right operand
    CHECK(testing::gradient_error([&](const Inputs& in) { return testing::weighted_sum(op(in[0], in[1])); },
                                  {testing::random_leaf({2, 3, 4}, rng), testing::random_leaf({4}, rng)}) < kTol);
  }
}

TEST_CASE("autodiff: structural primitives match finite differences") {
  std::mt19937_64 rng(12);
  auto grad = [](const std::function<Tensor(const Inputs&)>& fn, Inputs in) {
    return testing::gradient_error([&](const Inputs& x) { return testing::weighted_sum(fn(x)); }, std::move(in));
  };
  CHECK(grad([](const Inputs& x) { return ad::matmul(x[0], x[1]); },
             {testing::random_leaf({2, 3, 4}, rng), testing::random_leaf({2, 4, 5}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::matmul(x[0], x[1]); },
             {testing::random_leaf({2, 3, 4}, rng), testing::random_leaf({4, 2}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::transpose(x[0]); }, {testing::random_leaf({2, 3, 4}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::permute(x[0], {2, 0, 1}); }, {testing::random_leaf({2, 3, 4}, rng)}) <
        kTol);
  CHECK(grad([](const Inputs& x) { return ad::reshape(x[0], {6, 4}); }, {testing::random_leaf({2, 3, 4}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::concat({x[0], x[1]}, 1); },
             {testing::random_leaf({2, 3, 2}, rng), testing::random_leaf({2, 1, 2}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::slice(x[0], 1, 1, 2); }, {testing::random_leaf({2, 4, 3}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::gather(x[0], {3, 0, -1, 3}, {2.0, -1.0, 5.0, 0.5}, {2, 2}); },
             {testing::random_leaf({4}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::sum(x[0], 1); }, {testing::random_leaf({2, 3, 4}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::mean(x[0], -1); }, {testing::random_leaf({2, 3, 4}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::sum(x[0]); }, {testing::random_leaf({2, 3}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::mean(x[0]); }, {testing::random_leaf({2, 3}, rng)}) < kTol);
}

TEST_CASE("autodiff: softmax, layer_norm and solve match finite differences") {
  std::mt19937_64 rng(13);
  auto grad = [](const std::function<Tensor(const Inputs&)>& fn, Inputs in) {
    return testing::gradient_error([&](const Inputs& x) { return testing::weighted_sum(fn(x)); }, std::move(in));
  };
  CHECK(grad([](const Inputs& x) { return ad::softmax(x[0], -1); }, {testing::random_leaf({3, 5}, rng, -2, 2)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::softmax(x[0], 0); }, {testing::random_leaf({3, 5}, rng, -2, 2)}) < kTol);
  const auto mask = Tensor::constant({3, 3}, {0, -1e9, -1e9, 0, 0, -1e9, 0, 0, 0});
  CHECK(grad([&](const Inputs& x) { return ad::softmax(x[0], -1, mask); }, {testing::random_leaf({2, 3, 3}, rng)}) < kTol);
  CHECK(grad([](const Inputs& x) { return ad::layer_norm(x[0]); }, {testing::random_leaf({3, 6}, rng, -2, 2)}) < kTol);

  std::vector<double> a(2 * 16);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 16; ++i) a[b * 16 + i] = u(rng) + (i % 5 == 0 ? 3.0 : 0.0);
  auto am = Tensor::leaf({2, 4, 4}, a, true);
  CHECK(grad([](const Inputs& x) { return ad::solve(x[0], x[1]); }, {am, testing::random_leaf({2, 4, 3}, rng)}) < kTol);
}

TEST_CASE("autodiff: solve matches a dense oracle and rejects singular systems") {
  std::mt19937_64 rng(14);
  auto a = testing::random_leaf({3, 3}, rng);
  auto b = testing::random_leaf({3, 2}, rng);
  auto x = ad::solve(a, b);
  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> ea(a.values().data());
  Eigen::Map<const Eigen::Matrix<double, 3, 2, Eigen::RowMajor>> eb(b.values().data());
  Eigen::Matrix<double, 3, 2, Eigen::RowMajor> ex = ea.fullPivLu().solve(eb);
  for (int i = 0; i < 6; ++i) CHECK(x.values()[i] == doctest::Approx(ex.data()[i]).epsilon(1e-10));
  CHECK_THROWS_AS(ad::solve(Tensor::zeros({2, 2}), Tensor::zeros({2, 1})), NumericalError);
}

TEST_CASE("autodiff: masked softmax gives uniform weights and exact zeros") {
  const int t = 4;
  std::vector<double> mask(t * t, 0.0);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) mask[i * t + j] = -1e9;
  auto logits = Tensor::leaf({t, t}, std::vector<double>(t * t, 0.3), true);
  auto w = ad::softmax(logits, -1, Tensor::constant({t, t}, mask));
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j) {
      if (j <= i) CHECK(w.values()[i * t + j] == doctest::Approx(1.0 / (i + 1)));
      else CHECK(w.values()[i * t + j] == 0.0);
    }
  ad::backward(testing::weighted_sum(w));
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) CHECK(logits.grad()[i * t + j] == 0.0);
}

TEST_CASE("autodiff: complex helpers match dense complex arithmetic") {
  std::mt19937_64 rng(15);
  ad::CTensor a{testing::random_leaf({4, 4}, rng), testing::random_leaf({4, 4}, rng)};
  ad::CTensor b{testing::random_leaf({4, 4}, rng), testing::random_leaf({4, 4}, rng)};
  auto c = ad::complex_matmul(a, b);
  auto ah = ad::complex_conj_transpose(a);
  auto p = ad::complex_mul(a, b);
  auto z = [](const ad::CTensor& t, int i) { return std::complex<double>(t.re.values()[i], t.im.values()[i]); };
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      std::complex<double> acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += z(a, i * 4 + k) * z(b, k * 4 + j);
      CHECK(std::abs(z(c, i * 4 + j) - acc) < 1e-12);
      CHECK(z(ah, i * 4 + j) == std::conj(z(a, j * 4 + i)));
      CHECK(std::abs(z(p, i * 4 + j) - z(a, i * 4 + j) * z(b, i * 4 + j)) < 1e-12);
    }
  CHECK(testing::gradient_error(
            [](const Inputs& x) {
              auto r = ad::complex_matmul({x[0], x[1]}, ad::complex_conj_transpose({x[2], x[3]}));
              return testing::weighted_sum(r.re) + testing::weighted_sum(r.im, 5);
            },
            {a.re, a.im, b.re, b.im}) < kTol);
}

TEST_CASE("autodiff: istft matches synthesize and its adjoint matches finite differences") {
  StftConfig cfg;
  cfg.window_len = 8;
  cfg.hop = 2;
  std::mt19937_64 rng(16);
  const std::size_t ns = 21;
  Signal x(ns);
  std::normal_distribution<double> nd;
  for (double& v : x) v = nd(rng);
  const auto spec = analyze({x}, cfg);
  const int frames = spec.frames(), bins = spec.bins();
  std::vector<double> re(frames * bins), im(frames * bins);
  for (int t = 0; t < frames; ++t)
    for (int f = 0; f < bins; ++f) {
      re[t * bins + f] = spec(0, f, t).real();
      im[t * bins + f] = spec(0, f, t).imag();
    }
  auto y = ad::istft(Tensor::constant({frames, bins}, re), Tensor::constant({frames, bins}, im), cfg, ns);
  const auto ref = synthesize(spec);
  for (std::size_t i = 0; i < ns; ++i) CHECK(y.values()[i] == doctest::Approx(ref[0][i]).epsilon(1e-12));

  auto zr = testing::random_leaf({frames, bins}, rng);
  auto zi = testing::random_leaf({frames, bins}, rng);
  CHECK(testing::gradient_error(
            [&](const Inputs& in) { return testing::weighted_sum(ad::istft(in[0], in[1], cfg, ns)); }, {zr, zi}) <
        kTol);
}

TEST_CASE("autodiff: three-layer MLP matches finite differences") {
  std::mt19937_64 rng(17);
  auto x = Tensor::constant({4, 3}, std::vector<double>{0.1, -0.3, 0.8, 1.2, 0.4, -0.9, -0.5, 0.2, 0.6, 0.3, 0.3, -1.0});
  Inputs params{testing::random_leaf({3, 5}, rng), testing::random_leaf({5}, rng), testing::random_leaf({5, 5}, rng),
                testing::random_leaf({5}, rng), testing::random_leaf({5, 1}, rng)};
  auto net = [&](const Inputs& p) {
    auto h = ad::sigmoid(ad::matmul(x, p[0]) + p[1]);
    h = ad::relu(ad::matmul(h, p[2]) + p[3]);
    return ad::sum(ad::power(ad::matmul(h, p[4]), 2.0));
  };
  CHECK(testing::gradient_error(net, params) < kTol);
}

TEST_CASE("autodiff: backward is deterministic and validates the loss") {
  std::mt19937_64 rng(18);
  auto a = testing::random_leaf({3, 4}, rng);
  auto run = [&] {
    a.zero_grad();
    ad::backward(ad::sum(ad::softmax(ad::matmul(a, ad::transpose(a)))));
    return a.grad();
  };
  CHECK(run() == run());
  CHECK_THROWS_AS(ad::backward(a), InvalidInput);
  auto bad = Tensor::leaf({}, {-1.0}, true);
  CHECK_THROWS_AS(ad::backward(ad::log(bad)), NumericalError);
  CHECK_THROWS_AS(ad::matmul(a, a), InvalidInput);
  CHECK_THROWS_AS(ad::add(a, testing::random_leaf({3}, rng)), InvalidInput);
}

TEST_CASE("autodiff: detached tensors stop gradients") {
  auto x = Tensor::leaf({2}, {1.0, 2.0}, true);
  auto y = x.detach() * x;
  ad::backward(ad::sum(y));
  CHECK(x.grad() == std::vector<double>{1.0, 2.0});
}

TEST_CASE("optim: Adam update rules") {
  std::vector<double> w{1.0};
  std::vector<double> zero_grad{0.0};
  std::vector<std::vector<double>*> values{&w};
  std::vector<const std::vector<double>*> grads{&zero_grad};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 0.1;
  adam_step(values, grads, cfg, state);
  CHECK(w[0] == 1.0);

  w = {1.0};
  AdamState fresh;
  std::vector<double> g{2.0};
  grads = {&g};
  adam_step(values, grads, cfg, fresh);
  // First bias-corrected step is lr * g / (|g| + eps).
  CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)));

  w = {3.0, -2.0};
  AdamState quad;
  cfg.lr = 0.05;
  const double initial = w[0] * w[0] + 4 * w[1] * w[1];
  std::vector<double> gq(2);
  grads = {&gq};
  for (int i = 0; i < 200; ++i) {
    gq = {2 * w[0], 8 * w[1]};
    adam_step(values, grads, cfg, quad);
  }
  CHECK(w[0] * w[0] + 4 * w[1] * w[1] < 0.01 * initial);
}

TEST_CASE("optim: checkpoints round-trip and reject mismatches") {
  std::mt19937_64 rng(19);
  ParameterSet a;
  a.create("layer.weight", {3, 2}, 0.5, rng);
  a.create_constant("layer.gain", {2}, 1.0);
  const auto path = (std::filesystem::temp_directory_path() / "attnbf_ckpt_test.bin").string();
  save_checkpoint(path, a);

  std::mt19937_64 other(20);
  ParameterSet b;
  b.create("layer.weight", {3, 2}, 0.5, other);
  b.create_constant("layer.gain", {2}, 0.0);
  load_checkpoint(path, b);
  CHECK(b.params()[0].tensor.values() == a.params()[0].tensor.values());
  CHECK(b.params()[1].tensor.values() == a.params()[1].tensor.values());

  ParameterSet c;
  c.create("layer.weight", {2, 3}, 0.5, other);
  CHECK_THROWS_AS(load_checkpoint(path, c), IoError);
  ParameterSet d;
  d.create("missing", {1}, 0.5, other);
  CHECK_THROWS_AS(load_checkpoint(path, d), IoError);
  CHECK_THROWS_AS(a.create("layer.weight", {1}, 0.1, rng), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path, b), IoError);
}
