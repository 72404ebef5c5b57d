// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/attention.h"

#include <cmath>

#include "attnbf/error.h"

namespace attnbf {

void AttentionConfig::validate() const {
  if (num_blocks < 0) throw ConfigError("attention: blocks must be >= 0");
  if (num_heads < 1 || model_dim < 1 || ff_dim < 1) throw ConfigError("attention: heads/model_dim/ff_dim must be >= 1");
  if (model_dim % num_heads != 0) throw ConfigError("attention: model_dim must be divisible by heads");
  if (input_dim < 1) throw ConfigError("attention: input_dim must be set");
  if (!use_input_linear && input_dim != model_dim)
    throw ConfigError("attention: input_dim must equal model_dim without an input linear layer");
  if (dropout != 0.0) throw ConfigError("attention: only dropout = 0 is supported");
}

void AttentionConfig::bind(ConfigBinder& binder, const std::string& section) {
  binder.bind(section, "blocks", num_blocks);
  binder.bind(section, "heads", num_heads);
  binder.bind(section, "model_dim", model_dim);
  binder.bind(section, "ff_dim", ff_dim);
  binder.bind(section, "input_linear", use_input_linear);
  binder.bind(section, "output_linear", use_output_linear);
  binder.bind(section, "dropout", dropout);
  binder.bind(section, "seed", seed);
}

ad::Tensor positional_encoding(int frames, int model_dim) {
  std::vector<double> pe(static_cast<std::size_t>(frames) * model_dim);
  for (int t = 0; t < frames; ++t)
    for (int i = 0; i < model_dim; i += 2) {
      const double angle = t / std::pow(10000.0, static_cast<double>(i) / model_dim);
      pe[std::size_t(t) * model_dim + i] = std::sin(angle);
      if (i + 1 < model_dim) pe[std::size_t(t) * model_dim + i + 1] = std::cos(angle);
    }
  return ad::Tensor::constant({frames, model_dim}, std::move(pe));
}

ad::Tensor causal_mask(int frames) {
  std::vector<double> m(static_cast<std::size_t>(frames) * frames, 0.0);
  for (int t = 0; t < frames; ++t)
    for (int tau = t + 1; tau < frames; ++tau) m[std::size_t(t) * frames + tau] = -1e9;
  return ad::Tensor::constant({frames, frames}, std::move(m));
}

Linear::Linear(ParameterSet& params, const std::string& name, int in, int out, std::mt19937_64& rng, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = params.create(name + ".weight", {in, out}, bound, rng);
  if (bias) bias_ = params.create(name + ".bias", {out}, bound, rng);
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  ad::Tensor y = ad::matmul(x, weight_);
  return bias_.defined() ? y + bias_ : y;
}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, int dim) {
  gain_ = params.create_constant(name + ".gain", {dim}, 1.0);
  bias_ = params.create_constant(name + ".bias", {dim}, 0.0);
}

ad::Tensor LayerNorm::operator()(const ad::Tensor& x) const { return ad::layer_norm(x) * gain_ + bias_; }

EncoderBlock::EncoderBlock(ParameterSet& params, const std::string& name, const AttentionConfig& cfg,
                           std::mt19937_64& rng)
    : heads_(cfg.num_heads),
      q_(params, name + ".attn.q", cfg.model_dim, cfg.model_dim, rng),
      k_(params, name + ".attn.k", cfg.model_dim, cfg.model_dim, rng),
      v_(params, name + ".attn.v", cfg.model_dim, cfg.model_dim, rng),
      o_(params, name + ".attn.out", cfg.model_dim, cfg.model_dim, rng),
      ff1_(params, name + ".ff1", cfg.model_dim, cfg.ff_dim, rng),
      ff2_(params, name + ".ff2", cfg.ff_dim, cfg.model_dim, rng),
      norm1_(params, name + ".norm1", cfg.model_dim),
      norm2_(params, name + ".norm2", cfg.model_dim) {}

ad::Tensor EncoderBlock::operator()(const ad::Tensor& x, const ad::Tensor& mask) const {
  if (x.ndim() != 3) throw InvalidInput("encoder block expects [B, T, D], got " + ad::to_string(x.shape()));
  const int b = x.dim(0), t = x.dim(1), d = x.dim(2);
  const int dh = d / heads_;
  auto split = [&](const ad::Tensor& y) { return ad::permute(ad::reshape(y, {b, t, heads_, dh}), {0, 2, 1, 3}); };
  const ad::Tensor q = split(q_(x));
  const ad::Tensor k = split(k_(x));
  const ad::Tensor v = split(v_(x));
  const ad::Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
  const ad::Tensor attn = ad::softmax(scores, -1, mask);
  const ad::Tensor ctx = ad::reshape(ad::permute(ad::matmul(attn, v), {0, 2, 1, 3}), {b, t, d});
  const ad::Tensor x1 = norm1_(x + o_(ctx));
  const ad::Tensor out = norm2_(x1 + ff2_(ad::relu(ff1_(x1))));
  for (double val : out.values())
    if (!std::isfinite(val)) throw NumericalError("encoder block produced a non-finite value");
  return out;
}

AttentionTrunk::AttentionTrunk(ParameterSet& params, const std::string& name, const AttentionConfig& cfg,
                               std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg.validate();
  if (cfg.use_input_linear) input_ = Linear(params, name + ".input", cfg.input_dim, cfg.model_dim, rng);
  for (int i = 0; i < cfg.num_blocks; ++i)
    blocks_.emplace_back(params, name + ".block" + std::to_string(i), cfg, rng);
}

ad::Tensor AttentionTrunk::operator()(const ad::Tensor& x, bool causal) const {
  if (x.ndim() != 3 || x.dim(2) != cfg_.input_dim)
    throw InvalidInput("attention input must be [B, T, " + std::to_string(cfg_.input_dim) + "], got " +
                       ad::to_string(x.shape()));
  const int frames = x.dim(1);
  ad::Tensor h = cfg_.use_input_linear ? input_(x) : x;
  h = h + positional_encoding(frames, cfg_.model_dim);
  const ad::Tensor mask = causal ? causal_mask(frames) : ad::Tensor();
  for (const auto& block : blocks_) h = block(h, mask);
  return h;
}

LaModule::LaModule(ParameterSet& params, const std::string& name, const AttentionConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg),
      trunk_(params, name, cfg, rng),
      query_(params, name + ".head.query", cfg.model_dim, cfg.model_dim, rng, false),
      key_(params, name + ".head.key", cfg.model_dim, cfg.model_dim, rng, false) {}

ad::Tensor LaModule::operator()(const ad::Tensor& x) const {
  const ad::Tensor h = trunk_(x);
  const ad::Tensor logits = ad::scale(ad::matmul(query_(h), ad::transpose(key_(h))),
                                      1.0 / std::sqrt(static_cast<double>(cfg_.model_dim)));
  return ad::softmax(logits, -1, causal_mask(x.dim(1)));
}

NlaModule::NlaModule(ParameterSet& params, const std::string& name, const AttentionConfig& cfg,
                     std::mt19937_64& rng)
    : cfg_(cfg), trunk_(params, name, cfg, rng) {
  if (cfg.output_dim < 1) throw ConfigError("nla: output_dim must be set");
  has_output_ = cfg.use_output_linear || cfg.output_dim != cfg.model_dim;
  if (has_output_) output_ = Linear(params, name + ".output", cfg.model_dim, cfg.output_dim, rng);
}

ad::Tensor NlaModule::operator()(const ad::Tensor& x) const {
  const ad::Tensor h = trunk_(x);
  return has_output_ ? output_(h) : h;
}

AttentionWeights la_forward(const LaModule& la, const std::vector<double>& inputs, int frames) {
  const int dim = la.config().input_dim;
  if (inputs.size() != static_cast<std::size_t>(frames) * dim) throw InvalidInput("la_forward: input size mismatch");
  const ad::Tensor w = la(ad::Tensor::constant({1, frames, dim}, inputs));
  return {frames, w.values()};
}

ScmSequence la_combine(const AttentionWeights& weights, const ScmSequence& iscms) {
  if (weights.frames != iscms.frames()) throw InvalidInput("la_combine: weight/ISCM frame counts differ");
  ScmSequence out(iscms.bins(), iscms.frames(), iscms.mics(), iscms.kind());
  const std::size_t mm = std::size_t(iscms.mics()) * iscms.mics();
  for (int f = 0; f < iscms.bins(); ++f)
    for (int t = 0; t < iscms.frames(); ++t) {
      auto dst = out.slice(f, t);
      for (int tau = 0; tau <= t; ++tau) {
        const double w = weights(t, tau);
        if (w == 0.0) continue;
        auto src = iscms.slice(f, tau);
        for (std::size_t i = 0; i < mm; ++i) dst[i] += w * src[i];
      }
    }
  return out;
}

std::vector<double> normalize_frames(const std::vector<double>& frames_by_dim, int frames, int dim) {
  if (frames_by_dim.size() != static_cast<std::size_t>(frames) * dim)
    throw InvalidInput("normalize_frames: size mismatch");
  std::vector<double> out(static_cast<std::size_t>(frames) * (dim + 1));
  for (int t = 0; t < frames; ++t) {
    const double* x = frames_by_dim.data() + std::size_t(t) * dim;
    double energy = 0.0;
    for (int i = 0; i < dim; ++i) energy += x[i] * x[i];
    const double rms = std::sqrt(energy / dim) + 1e-12;
    double* y = out.data() + std::size_t(t) * (dim + 1);
    for (int i = 0; i < dim; ++i) y[i] = x[i] / rms;
    y[dim] = std::log10(rms);
  }
  return out;
}

}  // namespace attnbf
