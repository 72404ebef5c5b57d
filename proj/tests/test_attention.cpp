// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>

#include "attnbf/attention.h"
#include "attnbf/error.h"
#include "gradcheck.h"
#include "test_util.h"

using namespace attnbf;
using ad::Tensor;
using Mat = std::vector<std::vector<double>>;

namespace {

AttentionConfig tiny_config(int input_dim) {
  AttentionConfig cfg;
  cfg.num_blocks = 2;
  cfg.num_heads = 2;
  cfg.model_dim = 8;
  cfg.ff_dim = 12;
  cfg.input_dim = input_dim;
  cfg.output_dim = 5;
  cfg.seed = 3;
  return cfg;
}

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

// -- straight-line reference encoder -------------------------------------------

const std::vector<double>& param(const ParameterSet& p, const std::string& name) {
  const Parameter* found = p.find(name);
  REQUIRE(found != nullptr);
  return found->tensor.values();
}

Mat linear(const Mat& x, const ParameterSet& p, const std::string& name) {
  const auto& w = param(p, name + ".weight");
  const auto& b = param(p, name + ".bias");
  const std::size_t in = x[0].size(), out = b.size();
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t t = 0; t < x.size(); ++t)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[t][i] * w[i * out + o];
      y[t][o] = acc;
    }
  return y;
}

Mat norm(const Mat& x, const ParameterSet& p, const std::string& name) {
  const auto& g = param(p, name + ".gain");
  const auto& b = param(p, name + ".bias");
  Mat y = x;
  for (auto& row : y) {
    double mu = 0.0, var = 0.0;
    for (double v : row) mu += v;
    mu /= row.size();
    for (double v : row) var += (v - mu) * (v - mu);
    var /= row.size();
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = (row[i] - mu) / std::sqrt(var + 1e-5) * g[i] + b[i];
  }
  return y;
}

Mat reference_block(const Mat& x, const ParameterSet& p, const std::string& name, int heads, bool causal) {
  const int t_len = static_cast<int>(x.size()), d = static_cast<int>(x[0].size()), dh = d / heads;
  const Mat q = linear(x, p, name + ".attn.q"), k = linear(x, p, name + ".attn.k"), v = linear(x, p, name + ".attn.v");
  Mat ctx(t_len, std::vector<double>(d, 0.0));
  for (int h = 0; h < heads; ++h)
    for (int t = 0; t < t_len; ++t) {
      const int last = causal ? t : t_len - 1;
      std::vector<double> s(last + 1);
      double mx = -1e300;
      for (int tau = 0; tau <= last; ++tau) {
        double dot = 0.0;
        for (int i = 0; i < dh; ++i) dot += q[t][h * dh + i] * k[tau][h * dh + i];
        s[tau] = dot / std::sqrt(double(dh));
        mx = std::max(mx, s[tau]);
      }
      double z = 0.0;
      for (double& e : s) z += (e = std::exp(e - mx));
      for (int tau = 0; tau <= last; ++tau)
        for (int i = 0; i < dh; ++i) ctx[t][h * dh + i] += s[tau] / z * v[tau][h * dh + i];
    }
  Mat a = linear(ctx, p, name + ".attn.out");
  for (int t = 0; t < t_len; ++t)
    for (int i = 0; i < d; ++i) a[t][i] += x[t][i];
  const Mat x1 = norm(a, p, name + ".norm1");
  Mat hidden = linear(x1, p, name + ".ff1");
  for (auto& row : hidden)
    for (double& e : row) e = std::max(e, 0.0);
  Mat f = linear(hidden, p, name + ".ff2");
  for (int t = 0; t < t_len; ++t)
    for (int i = 0; i < d; ++i) f[t][i] += x1[t][i];
  return norm(f, p, name + ".norm2");
}

}  // namespace

TEST_CASE("attention: positional encoding values") {
  auto pe = positional_encoding(5, 256);
  for (int i = 0; i < 256; ++i) CHECK(pe.values()[i] == (i % 2 == 0 ? 0.0 : 1.0));
  for (double v : pe.values()) CHECK(std::abs(v) <= 1.0);
  for (int i = 0; i < 4; ++i) {
    const double angle = 1.0 / std::pow(10000.0, (i - i % 2) / 256.0);
    CHECK(pe.values()[256 + i] == doctest::Approx(i % 2 ? std::cos(angle) : std::sin(angle)).epsilon(1e-14));
  }
}

TEST_CASE("attention: encoder block matches a straight-line reference") {
  auto cfg = tiny_config(8);
  ParameterSet params;
  std::mt19937_64 rng(cfg.seed);
  EncoderBlock block(params, "blk", cfg, rng);
  // Perturb the layer-norm affine terms so they are exercised.
  for (auto& p : params.params())
    if (p.name.find("norm") != std::string::npos)
      for (double& v : p.tensor.mutable_values()) v += 0.1 * std::sin(v + p.name.size());

  const int t_len = 6;
  const auto xv = random_values(t_len * 8, 4);
  Mat x(t_len, std::vector<double>(8));
  for (int t = 0; t < t_len; ++t)
    for (int i = 0; i < 8; ++i) x[t][i] = xv[t * 8 + i];
  for (bool causal : {true, false}) {
    auto y = block(Tensor::constant({1, t_len, 8}, xv), causal ? causal_mask(t_len) : Tensor());
    const Mat ref = reference_block(x, params, "blk", 2, causal);
    for (int t = 0; t < t_len; ++t)
      for (int i = 0; i < 8; ++i) CHECK(y.values()[t * 8 + i] == doctest::Approx(ref[t][i]).epsilon(1e-10));
  }
}

TEST_CASE("attention: causal encoder ignores future frames") {
  auto cfg = tiny_config(8);
  ParameterSet params;
  std::mt19937_64 rng(cfg.seed);
  EncoderBlock block(params, "blk", cfg, rng);
  auto xv = random_values(7 * 8, 5);
  auto a = block(Tensor::constant({1, 7, 8}, xv), causal_mask(7));
  for (int i = 4 * 8; i < 7 * 8; ++i) xv[i] = 0.0;
  auto b = block(Tensor::constant({1, 7, 8}, xv), causal_mask(7));
  for (int i = 0; i < 4 * 8; ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-6);

  auto single = Tensor::constant({1, 1, 8}, random_values(8, 6));
  auto y1 = block(single, causal_mask(1));
  auto y2 = block(single, Tensor());
  CHECK(y1.values() == y2.values());
}

TEST_CASE("attention: LA weights are causal probability distributions") {
  auto cfg = tiny_config(6);
  ParameterSet params;
  std::mt19937_64 rng(cfg.seed);
  LaModule la(params, "la", cfg, rng);
  for (int frames : {1, 9}) {
    const auto w = la_forward(la, random_values(frames * 6, 7 + frames), frames);
    for (int t = 0; t < frames; ++t) {
      double sum = 0.0;
      for (int tau = 0; tau < frames; ++tau) {
        CHECK(w(t, tau) >= 0.0);
        if (tau > t) CHECK(w(t, tau) == 0.0);
        sum += w(t, tau);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    if (frames == 1) CHECK(w(0, 0) == 1.0);
  }
}

TEST_CASE("attention: la_combine reduces to selection and to cum_avg") {
  std::mt19937_64 rng(8);
  const int frames = 6, bins = 3, mics = 3;
  ScmSequence psi(bins, frames, mics);
  for (int f = 0; f < bins; ++f)
    for (int t = 0; t < frames; ++t) psi.set(f, t, iscm(testing::random_vector(mics, rng)));

  AttentionWeights uniform{frames, std::vector<double>(frames * frames, 0.0)};
  AttentionWeights select = uniform;
  for (int t = 0; t < frames; ++t) {
    for (int tau = 0; tau <= t; ++tau) uniform.w[t * frames + tau] = 1.0 / (t + 1);
    select.w[t * frames + t / 2] = 1.0;
  }
  const auto cum = cum_avg(psi), u = la_combine(uniform, psi), s = la_combine(select, psi);
  for (int f = 0; f < bins; ++f)
    for (int t = 0; t < frames; ++t) {
      CHECK((u.at(f, t) - cum.at(f, t)).max_abs() < 1e-10);
      CHECK((s.at(f, t) - psi.at(f, t / 2)).max_abs() == 0.0);
    }
  CHECK_THROWS_AS(la_combine(AttentionWeights{2, std::vector<double>(4)}, psi), InvalidInput);
}

TEST_CASE("attention: NLA output shape, causality and gradients") {
  auto cfg = tiny_config(6);
  ParameterSet params;
  std::mt19937_64 rng(cfg.seed);
  NlaModule nla(params, "nla", cfg, rng);
  for (int frames : {1, 4, 11}) CHECK(nla(Tensor::constant({1, frames, 6}, random_values(frames * 6, 9))).shape() ==
                                      ad::Shape{1, frames, 5});
  auto xv = random_values(8 * 6, 10);
  auto a = nla(Tensor::constant({1, 8, 6}, xv));
  for (int i = 5 * 6; i < 8 * 6; ++i) xv[i] += 3.0;
  auto b = nla(Tensor::constant({1, 8, 6}, xv));
  for (int i = 0; i < 5 * 5; ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-6);

  std::vector<Tensor> leaves;
  for (auto& p : params.params()) leaves.push_back(p.tensor);
  const auto x = Tensor::constant({1, 3, 6}, random_values(18, 11));
  CHECK(testing::gradient_error([&](const std::vector<Tensor>&) { return testing::weighted_sum(nla(x)); }, leaves) <
        1e-4);
}

TEST_CASE("attention: LA gradients match finite differences") {
  auto cfg = tiny_config(6);
  cfg.num_blocks = 1;
  ParameterSet params;
  std::mt19937_64 rng(cfg.seed);
  LaModule la(params, "la", cfg, rng);
  std::vector<Tensor> leaves;
  for (auto& p : params.params()) leaves.push_back(p.tensor);
  const auto x = Tensor::constant({2, 3, 6}, random_values(36, 12));
  CHECK(testing::gradient_error([&](const std::vector<Tensor>&) { return testing::weighted_sum(la(x)); }, leaves) <
        1e-4);
}

TEST_CASE("attention: configuration validation") {
  auto cfg = tiny_config(6);
  cfg.num_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config(6);
  cfg.use_input_linear = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config(6);
  cfg.dropout = 0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  AttentionConfig parsed;
  ConfigBinder binder;
  parsed.bind(binder, "attention");
  binder.apply(parse_config_text("[attention]\nblocks = 3\nheads = 8\nmodel_dim = 64\n"));
  CHECK(parsed.num_blocks == 3);
  CHECK(parsed.num_heads == 8);
  CHECK(parsed.model_dim == 64);
  CHECK(parsed.ff_dim == 2048);
  CHECK_THROWS_AS(binder.apply(parse_config_text("[attention]\nwidth = 3\n")), ConfigError);
}

TEST_CASE("attention: normalize_frames scales each frame to unit RMS") {
  const std::vector<double> x{3, 4, 0, 0, 0, 0};
  const auto y = normalize_frames(x, 2, 3);
  const double rms = std::sqrt(25.0 / 3.0);
  CHECK(y[0] == doctest::Approx(3 / rms));
  CHECK(y[3] == doctest::Approx(std::log10(rms)));
  CHECK(y[4] == 0.0);
  CHECK(y[7] == doctest::Approx(-12.0));
}
