// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// End-to-end enhancement pipelines.
//
// Mask-based methods: mask -> masked speech / noise -> ISCMs -> SCM estimate
// -> filter -> Z = h^H y -> iSTFT. FL-SF maps the mixture straight to filters.
// Learned methods run as autodiff graphs so the loss can be backpropagated
// to the attention parameters; baselines use the plain numeric path.

#pragma once

#include <memory>
#include <span>
#include <string>

#include "attnbf/attention.h"
#include "attnbf/autodiff.h"
#include "attnbf/beamformer.h"
#include "attnbf/config.h"
#include "attnbf/covariance.h"
#include "attnbf/masking.h"
#include "attnbf/optim.h"
#include "attnbf/stft.h"

namespace attnbf {

enum class Method { kIdentity, kCum, kRec, kBlock, kLa, kNla, kIc, kFlSf };

// Accepts identity|cum|rec|block|la|nla|ic|flsf. Throws ConfigError otherwise.
Method parse_method(const std::string& name);
std::string method_name(Method method);
bool is_learned(Method method);
bool uses_mask(Method method);

struct BaselineOptions {
  double alpha = 0.95;
  int window = 25;
  MvdrOptions mvdr;
  ReferenceSelector ref;
};

// Identity or averaging-MVDR enhancement of one utterance; returns a
// single-channel spectrogram.
Spectrogram enhance_baseline(Method method, const Spectrogram& mixture, const Mask& mask,
                             const BaselineOptions& opts = {});

// -- differentiable building blocks (batch order (t, f), B = T * F) ------------

// [T, F * Dv] per-frame vectors -> complex [T * F, M, M] matrices.
ad::CTensor expand_scm_tensor(const ad::Tensor& vec, int mics, int bins, Vectorization mode);
// Loaded-MVDR filters [B, M]. The loading level is treated as a constant.
ad::CTensor mvdr_tensor(const ad::CTensor& phi_xx, const ad::CTensor& phi_nn, int ref, const MvdrOptions& opts = {});
// h = A_xx A_nn u_ref, [B, M].
ad::CTensor ic_mvdr_tensor(const ad::CTensor& a_xx, const ad::CTensor& a_nn, int ref);
// Z = h^H y for filters [T * F, M]; returns (re, im) each [T, F].
ad::CTensor apply_filter_tensor(const ad::CTensor& h, const Spectrogram& mixture);
// Eq.-(8)-style loss in dB over samples [begin, end); constant -120 when clamped.
ad::Tensor snr_loss_tensor(const ad::Tensor& s_hat, std::span<const double> s, std::size_t begin, std::size_t end);

// Per frame: real parts of (f, m) row-major, then imaginary parts. [T][2 F M].
std::vector<double> vectorize_mixture(const Spectrogram& mixture);

struct ModelConfig {
  Method variant = Method::kLa;
  AttentionConfig attention;
  Vectorization vectorization = Vectorization::kCompact;
  bool separate_networks = false;
  int mics = 5;
  int reference = 0;
  MvdrOptions mvdr;
  StftConfig stft;

  // Sections [model], [attention], [stft].
  void bind(ConfigBinder& binder);
  void validate() const;
  void save(const std::string& path) const;
  static ModelConfig load(const std::string& path);
  // Network input/output widths implied by the variant and STFT.
  int network_input_dim() const;
  int network_output_dim() const;
};

class SpatialFilterModel {
 public:
  explicit SpatialFilterModel(const ModelConfig& cfg);
  SpatialFilterModel(const SpatialFilterModel&) = delete;
  SpatialFilterModel& operator=(const SpatialFilterModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Filters [T * F, M] as a graph. `mask` is ignored by FL-SF.
  ad::CTensor filter_tensor(const Spectrogram& mixture, const Mask& mask) const;
  // Enhanced time-domain signal [num_samples] as a graph.
  ad::Tensor forward(const Spectrogram& mixture, const Mask& mask) const;
  FilterField filters(const Spectrogram& mixture, const Mask& mask) const;
  Spectrogram enhance(const Spectrogram& mixture, const Mask& mask) const;

  // Writes `path` (parameters) and `path`.cfg alongside it.
  void save(const std::string& path) const;
  // Reads `path`.cfg to build the model, then its parameters.
  static std::unique_ptr<SpatialFilterModel> load(const std::string& path);

 private:
  ad::Tensor run_network(int branch, const ad::Tensor& x) const;

  ModelConfig cfg_;
  ParameterSet params_;
  std::vector<std::unique_ptr<LaModule>> la_;
  std::vector<std::unique_ptr<NlaModule>> nla_;
};

}  // namespace attnbf
