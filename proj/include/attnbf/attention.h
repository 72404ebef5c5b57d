// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Causal transformer encoders used to estimate spatial statistics.
//
// Inputs are batched sequences [B, T, L]. Both heads share the same trunk:
// optional input projection, sinusoidal positional encoding and a stack of
// post-norm encoder blocks with a lower-triangular attention mask.
//   LaModule  -> attention weights [B, T, T] over past frames
//   NlaModule -> free sequence [B, T, L_out]

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "attnbf/autodiff.h"
#include "attnbf/config.h"
#include "attnbf/covariance.h"
#include "attnbf/optim.h"

namespace attnbf {

struct AttentionConfig {
  int num_blocks = 2;
  int num_heads = 4;
  int model_dim = 256;
  int ff_dim = 2048;
  int input_dim = 0;
  bool use_input_linear = true;
  // NLA only; forced on when model_dim differs from output_dim.
  bool use_output_linear = true;
  int output_dim = 0;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  // blocks, heads, model_dim, ff_dim, input_linear, output_linear, seed
  void bind(ConfigBinder& binder, const std::string& section);
};

// Sinusoidal table PE(t, 2i) = sin(t / 10000^(2i/d)), PE(t, 2i+1) = cos(...).
ad::Tensor positional_encoding(int frames, int model_dim);
// [T, T] additive mask: 0 where tau <= t, -1e9 above the diagonal.
ad::Tensor causal_mask(int frames);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, int in, int out, std::mt19937_64& rng, bool bias = true);
  ad::Tensor operator()(const ad::Tensor& x) const;
  int in_dim() const { return weight_.dim(0); }
  int out_dim() const { return weight_.dim(1); }

 private:
  ad::Tensor weight_;  // [in, out]
  ad::Tensor bias_;    // [out] or undefined
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterSet& params, const std::string& name, int dim);
  ad::Tensor operator()(const ad::Tensor& x) const;

 private:
  ad::Tensor gain_;
  ad::Tensor bias_;
};

class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(ParameterSet& params, const std::string& name, const AttentionConfig& cfg, std::mt19937_64& rng);
  // x: [B, T, model_dim]. `mask` is an additive [T, T] mask or undefined.
  ad::Tensor operator()(const ad::Tensor& x, const ad::Tensor& mask) const;

 private:
  int heads_ = 1;
  Linear q_, k_, v_, o_, ff1_, ff2_;
  LayerNorm norm1_, norm2_;
};

class AttentionTrunk {
 public:
  AttentionTrunk() = default;
  AttentionTrunk(ParameterSet& params, const std::string& name, const AttentionConfig& cfg, std::mt19937_64& rng);
  ad::Tensor operator()(const ad::Tensor& x, bool causal = true) const;

 private:
  AttentionConfig cfg_;
  Linear input_;
  std::vector<EncoderBlock> blocks_;
};

struct AttentionWeights {
  int frames = 0;
  std::vector<double> w;  // [T][T], row t = target frame
  double operator()(int t, int tau) const { return w[static_cast<std::size_t>(t) * frames + tau]; }
};

class LaModule {
 public:
  LaModule(ParameterSet& params, const std::string& name, const AttentionConfig& cfg, std::mt19937_64& rng);
  // x: [B, T, L] -> [B, T, T] row-stochastic lower-triangular weights.
  ad::Tensor operator()(const ad::Tensor& x) const;
  const AttentionConfig& config() const { return cfg_; }

 private:
  AttentionConfig cfg_;
  AttentionTrunk trunk_;
  Linear query_, key_;
};

class NlaModule {
 public:
  NlaModule(ParameterSet& params, const std::string& name, const AttentionConfig& cfg, std::mt19937_64& rng);
  // x: [B, T, L] -> [B, T, output_dim]
  ad::Tensor operator()(const ad::Tensor& x) const;
  const AttentionConfig& config() const { return cfg_; }

 private:
  AttentionConfig cfg_;
  AttentionTrunk trunk_;
  Linear output_;
  bool has_output_ = false;
};

// Runs `la` on a single [T][L] sequence and returns its weights.
AttentionWeights la_forward(const LaModule& la, const std::vector<double>& inputs, int frames);

// Phi(f, t) = sum_{tau <= t} w(t, tau) Psi(f, tau), weights shared across bins.
ScmSequence la_combine(const AttentionWeights& weights, const ScmSequence& iscms);

// Feature conditioning applied to every network input: each frame vector is
// divided by its RMS and its log10 RMS is appended, giving L + 1 values per
// frame. Frame-local, so causality is preserved.
std::vector<double> normalize_frames(const std::vector<double>& frames_by_dim, int frames, int dim);

}  // namespace attnbf
