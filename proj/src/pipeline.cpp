// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/pipeline.h"

#include <cmath>
#include <fstream>
#include <numbers>

#include "attnbf/error.h"
#include "attnbf/metrics.h"

namespace attnbf {
namespace {

constexpr struct {
  Method method;
  const char* name;
} kMethodNames[] = {
    {Method::kIdentity, "identity"}, {Method::kCum, "cum"}, {Method::kRec, "rec"}, {Method::kBlock, "block"},
    {Method::kLa, "la"},             {Method::kNla, "nla"}, {Method::kIc, "ic"},   {Method::kFlSf, "flsf"},
};

// [B] -> [B, n] by repeating each entry n times.
ad::Tensor repeat_last(const ad::Tensor& t, int n) {
  const int b = t.dim(0);
  std::vector<std::int64_t> index(static_cast<std::size_t>(b) * n);
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < n; ++k) index[std::size_t(i) * n + k] = i;
  return ad::gather(t, std::move(index), std::vector<double>(index.size(), 1.0), {b, n});
}

// Trace of each [M, M] matrix in a [B, M, M] tensor.
ad::Tensor batch_trace(const ad::Tensor& x) {
  const int b = x.dim(0), m = x.dim(1);
  std::vector<std::int64_t> index(static_cast<std::size_t>(b) * m);
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < m; ++k) index[std::size_t(i) * m + k] = (std::int64_t(i) * m + k) * m + k;
  return ad::sum(ad::gather(x, std::move(index), std::vector<double>(index.size(), 1.0), {b, m}), -1);
}

ad::Tensor constant_like(const ad::Tensor& t, std::vector<double> values) {
  return ad::Tensor::constant(t.shape(), std::move(values));
}

std::string vectorization_name(Vectorization v) { return v == Vectorization::kCompact ? "compact" : "full"; }

// Network features of the masked ISCMs of one branch: [T][F * Dv].
std::vector<double> branch_iscm_vectors(const Spectrogram& masked, Vectorization mode) {
  return vectorize_frames(iscm_sequence(masked, ScmKind::kMixture), mode);
}

}  // namespace

Method parse_method(const std::string& name) {
  for (const auto& entry : kMethodNames)
    if (name == entry.name) return entry.method;
  throw ConfigError("unknown method '" + name + "' (expected identity|cum|rec|block|la|nla|ic|flsf)");
}

std::string method_name(Method method) {
  for (const auto& entry : kMethodNames)
    if (entry.method == method) return entry.name;
  return "?";
}

bool is_learned(Method method) {
  return method == Method::kLa || method == Method::kNla || method == Method::kIc || method == Method::kFlSf;
}

bool uses_mask(Method method) { return method != Method::kIdentity && method != Method::kFlSf; }

Spectrogram enhance_baseline(Method method, const Spectrogram& mixture, const Mask& mask,
                             const BaselineOptions& opts) {
  if (method == Method::kIdentity) return mixture.channel(opts.ref.index);
  if (is_learned(method)) throw ConfigError("enhance_baseline: " + method_name(method) + " needs a model");
  const MaskedPair pair = split_with_mask(mixture, mask);
  const ScmSequence psi_x = iscm_sequence(pair.speech_est, ScmKind::kSpeech);
  const ScmSequence psi_n = iscm_sequence(pair.noise_est, ScmKind::kNoise);
  ScmSequence phi_x, phi_n;
  switch (method) {
    case Method::kCum:
      phi_x = cum_avg(psi_x);
      phi_n = cum_avg(psi_n);
      break;
    case Method::kRec:
      phi_x = rec_avg(psi_x, opts.alpha);
      phi_n = rec_avg(psi_n, opts.alpha);
      break;
    default:
      phi_x = block_avg(psi_x, opts.window);
      phi_n = block_avg(psi_n, opts.window);
      break;
  }
  return apply_filter(mixture, mvdr(phi_x, phi_n, opts.ref, opts.mvdr));
}

ad::CTensor expand_scm_tensor(const ad::Tensor& vec, int mics, int bins, Vectorization mode) {
  const int dv = vector_dim(mics, mode);
  if (vec.ndim() != 2 || vec.dim(1) != bins * dv)
    throw InvalidInput("expand_scm_tensor: expected [T, " + std::to_string(bins * dv) + "], got " +
                       ad::to_string(vec.shape()));
  const int frames = vec.dim(0);
  const std::size_t mm = std::size_t(mics) * mics;
  const std::size_t n = std::size_t(frames) * bins * mm;
  std::vector<std::int64_t> re_idx(n), im_idx(n);
  std::vector<double> re_coeff(n, 1.0), im_coeff(n, 1.0);
  for (int t = 0; t < frames; ++t)
    for (int f = 0; f < bins; ++f) {
      const std::int64_t base = (std::int64_t(t) * bins + f) * dv;
      for (int i = 0; i < mics; ++i)
        for (int j = 0; j < mics; ++j) {
          const std::size_t o = (std::size_t(t) * bins + f) * mm + std::size_t(i) * mics + j;
          if (mode == Vectorization::kFull) {
            re_idx[o] = base + i * mics + j;
            im_idx[o] = base + std::int64_t(mm) + i * mics + j;
          } else if (i == j) {
            re_idx[o] = base + i;
            im_idx[o] = -1;
          } else {
            const int r = std::max(i, j), c = std::min(i, j);
            const std::int64_t pos = base + mics + 2 * (r * (r - 1) / 2 + c);
            re_idx[o] = pos;
            im_idx[o] = pos + 1;
            im_coeff[o] = i > j ? 1.0 : -1.0;
          }
        }
    }
  const ad::Shape shape{frames * bins, mics, mics};
  return {ad::gather(vec, std::move(re_idx), std::move(re_coeff), shape),
          ad::gather(vec, std::move(im_idx), std::move(im_coeff), shape)};
}

ad::CTensor mvdr_tensor(const ad::CTensor& phi_xx, const ad::CTensor& phi_nn, int ref, const MvdrOptions& opts) {
  if (phi_nn.re.ndim() != 3 || phi_nn.re.dim(1) != phi_nn.re.dim(2) || phi_xx.re.shape() != phi_nn.re.shape())
    throw InvalidInput("mvdr_tensor: expected matching [B, M, M] inputs");
  const int b = phi_nn.re.dim(0), m = phi_nn.re.dim(1);
  if (ref < 0 || ref >= m) throw InvalidInput("mvdr_tensor: reference channel out of range");

  // Diagonal loading from the current values, held constant for the gradient.
  std::vector<double> load(static_cast<std::size_t>(b) * m * m, 0.0);
  const auto& nn = phi_nn.re.values();
  for (int i = 0; i < b; ++i) {
    double tr = 0.0;
    for (int k = 0; k < m; ++k) tr += nn[(std::size_t(i) * m + k) * m + k];
    const double level = opts.loading * (std::abs(tr) / m + opts.loading_floor);
    for (int k = 0; k < m; ++k) load[(std::size_t(i) * m + k) * m + k] = level;
  }
  const ad::Tensor a_re = phi_nn.re + constant_like(phi_nn.re, std::move(load));
  const ad::Tensor top = ad::concat({a_re, -phi_nn.im}, -1);
  const ad::Tensor bottom = ad::concat({phi_nn.im, a_re}, -1);
  const ad::Tensor x = ad::solve(ad::concat({top, bottom}, -2), ad::concat({phi_xx.re, phi_xx.im}, -2));
  const ad::Tensor n_re = ad::slice(x, -2, 0, m);
  const ad::Tensor n_im = ad::slice(x, -2, m, m);

  const ad::Tensor tr_re = batch_trace(n_re);
  const ad::Tensor tr_im = batch_trace(n_im);
  std::vector<double> degenerate(static_cast<std::size_t>(b), 0.0);
  for (int i = 0; i < b; ++i) {
    const double mag = std::hypot(tr_re.values()[i], tr_im.values()[i]);
    if (mag < opts.degenerate_trace || !std::isfinite(mag)) degenerate[i] = 1.0;
  }
  const ad::Tensor deg = ad::Tensor::constant({b}, degenerate);
  const ad::Tensor den = tr_re * tr_re + tr_im * tr_im + deg;
  const ad::Tensor inv_den = ad::reciprocal(den);
  const ad::Tensor inv_re = repeat_last(tr_re * inv_den, m);
  const ad::Tensor inv_im = repeat_last(-(tr_im * inv_den), m);
  const ad::Tensor col_re = ad::reshape(ad::slice(n_re, -1, ref, 1), {b, m});
  const ad::Tensor col_im = ad::reshape(ad::slice(n_im, -1, ref, 1), {b, m});

  std::vector<double> keep(static_cast<std::size_t>(b) * m), pass(static_cast<std::size_t>(b) * m, 0.0);
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < m; ++k) {
      keep[std::size_t(i) * m + k] = 1.0 - degenerate[i];
      if (k == ref) pass[std::size_t(i) * m + k] = degenerate[i];
    }
  const ad::Tensor keep_t = ad::Tensor::constant({b, m}, std::move(keep));
  const ad::Tensor h_re = (col_re * inv_re - col_im * inv_im) * keep_t + ad::Tensor::constant({b, m}, std::move(pass));
  const ad::Tensor h_im = (col_re * inv_im + col_im * inv_re) * keep_t;
  return {h_re, h_im};
}

ad::CTensor ic_mvdr_tensor(const ad::CTensor& a_xx, const ad::CTensor& a_nn, int ref) {
  if (a_nn.re.ndim() != 3 || a_xx.re.shape() != a_nn.re.shape())
    throw InvalidInput("ic_mvdr_tensor: expected matching [B, M, M] inputs");
  const int b = a_nn.re.dim(0), m = a_nn.re.dim(1);
  if (ref < 0 || ref >= m) throw InvalidInput("ic_mvdr_tensor: reference channel out of range");
  const ad::CTensor col{ad::slice(a_nn.re, -1, ref, 1), ad::slice(a_nn.im, -1, ref, 1)};
  const ad::CTensor h = ad::complex_matmul(a_xx, col);
  return {ad::reshape(h.re, {b, m}), ad::reshape(h.im, {b, m})};
}

ad::CTensor apply_filter_tensor(const ad::CTensor& h, const Spectrogram& mixture) {
  const int frames = mixture.frames(), bins = mixture.bins(), mics = mixture.channels();
  if (h.re.shape() != ad::Shape{frames * bins, mics})
    throw InvalidInput("apply_filter_tensor: filter shape " + ad::to_string(h.re.shape()) + " does not match mixture");
  std::vector<double> yr(h.re.numel()), yi(h.re.numel());
  for (int t = 0; t < frames; ++t)
    for (int f = 0; f < bins; ++f)
      for (int m = 0; m < mics; ++m) {
        const std::size_t o = (std::size_t(t) * bins + f) * mics + m;
        yr[o] = mixture(m, f, t).real();
        yi[o] = mixture(m, f, t).imag();
      }
  const ad::Tensor y_re = constant_like(h.re, std::move(yr));
  const ad::Tensor y_im = constant_like(h.re, std::move(yi));
  // conj(h) y
  const ad::Tensor z_re = ad::sum(h.re * y_re + h.im * y_im, -1);
  const ad::Tensor z_im = ad::sum(h.re * y_im - h.im * y_re, -1);
  return {ad::reshape(z_re, {frames, bins}), ad::reshape(z_im, {frames, bins})};
}

ad::Tensor snr_loss_tensor(const ad::Tensor& s_hat, std::span<const double> s, std::size_t begin, std::size_t end) {
  if (s_hat.ndim() != 1 || static_cast<std::size_t>(s_hat.numel()) != s.size())
    throw InvalidInput("snr_loss_tensor: estimate and reference lengths differ");
  if (begin >= end || end > s.size()) throw InvalidInput("snr_loss_tensor: empty or out-of-range sample range");
  double es = 0.0;
  for (std::size_t i = begin; i < end; ++i) es += s[i] * s[i];
  if (es == 0.0) throw InvalidInput("snr_loss_tensor: reference is silent over the range");
  const int len = static_cast<int>(end - begin);
  const ad::Tensor ref = ad::Tensor::constant({len}, std::vector<double>(s.begin() + begin, s.begin() + end));
  const ad::Tensor diff = ad::slice(s_hat, 0, static_cast<int>(begin), len) - ref;
  const ad::Tensor err = ad::sum(diff * diff);
  if (err.item() < kLossFloor * es) return ad::Tensor::scalar(10.0 * std::log10(kLossFloor));
  return ad::add_scalar(ad::scale(ad::log(err), 10.0 / std::numbers::ln10), -10.0 * std::log10(es));
}

std::vector<double> vectorize_mixture(const Spectrogram& mixture) {
  const int frames = mixture.frames(), bins = mixture.bins(), mics = mixture.channels();
  const std::size_t half = std::size_t(bins) * mics;
  std::vector<double> out(std::size_t(frames) * 2 * half);
  for (int t = 0; t < frames; ++t)
    for (int f = 0; f < bins; ++f)
      for (int m = 0; m < mics; ++m) {
        const std::size_t o = std::size_t(t) * 2 * half + std::size_t(f) * mics + m;
        out[o] = mixture(m, f, t).real();
        out[o + half] = mixture(m, f, t).imag();
      }
  return out;
}

// -- ModelConfig ---------------------------------------------------------------

void ModelConfig::bind(ConfigBinder& binder) {
  binder.bind_with(
      "model", "variant",
      [this](const std::string& v) {
        variant = parse_method(v);
        if (!is_learned(variant)) throw ConfigError("model.variant must be la|nla|ic|flsf");
      },
      [this] { return method_name(variant); });
  binder.bind_with(
      "model", "vectorization",
      [this](const std::string& v) {
        if (v == "compact") vectorization = Vectorization::kCompact;
        else if (v == "full") vectorization = Vectorization::kFull;
        else throw ConfigError("model.vectorization must be compact|full");
      },
      [this] { return vectorization_name(vectorization); });
  binder.bind("model", "separate_networks", separate_networks);
  binder.bind("model", "mics", mics);
  binder.bind("model", "reference", reference);
  binder.bind("model", "loading", mvdr.loading);
  attention.bind(binder, "attention");
  binder.bind("stft", "window_len", stft.window_len);
  binder.bind("stft", "hop", stft.hop);
  binder.bind("stft", "sample_rate", stft.sample_rate);
}

void ModelConfig::validate() const {
  if (!is_learned(variant)) throw ConfigError("model variant must be la|nla|ic|flsf");
  if (mics < 1) throw ConfigError("model.mics must be >= 1");
  if (reference < 0 || reference >= mics) throw ConfigError("model.reference out of range");
  stft.validate();
}

void ModelConfig::save(const std::string& path) const {
  ModelConfig copy = *this;
  ConfigBinder binder;
  copy.bind(binder);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << binder.dump();
  if (!os) throw IoError("write failed for " + path);
}

ModelConfig ModelConfig::load(const std::string& path) {
  ModelConfig cfg;
  ConfigBinder binder;
  cfg.bind(binder);
  binder.apply(parse_config_file(path));
  cfg.validate();
  return cfg;
}

int ModelConfig::network_input_dim() const { return network_output_dim() + 1; }

int ModelConfig::network_output_dim() const {
  const int bins = stft.num_bins();
  if (variant == Method::kFlSf) return 2 * bins * mics;
  return bins * vector_dim(mics, vectorization);
}

// -- SpatialFilterModel --------------------------------------------------------

SpatialFilterModel::SpatialFilterModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  cfg_.attention.input_dim = cfg_.network_input_dim();
  cfg_.attention.output_dim = cfg_.network_output_dim();
  std::mt19937_64 rng(cfg_.attention.seed);
  const bool two = cfg_.separate_networks && cfg_.variant != Method::kFlSf;
  const std::vector<std::string> names =
      two ? std::vector<std::string>{"speech", "noise"} : std::vector<std::string>{"shared"};
  for (const auto& branch : names) {
    const std::string prefix = method_name(cfg_.variant) + "." + branch;
    if (cfg_.variant == Method::kLa)
      la_.push_back(std::make_unique<LaModule>(params_, prefix, cfg_.attention, rng));
    else
      nla_.push_back(std::make_unique<NlaModule>(params_, prefix, cfg_.attention, rng));
  }
}

ad::Tensor SpatialFilterModel::run_network(int branch, const ad::Tensor& x) const {
  if (cfg_.variant == Method::kLa) return (*la_[la_.size() == 1 ? 0 : branch])(x);
  return (*nla_[nla_.size() == 1 ? 0 : branch])(x);
}

ad::CTensor SpatialFilterModel::filter_tensor(const Spectrogram& mixture, const Mask& mask) const {
  if (mixture.channels() != cfg_.mics) throw InvalidInput("model expects " + std::to_string(cfg_.mics) + " channels");
  if (mixture.bins() != cfg_.stft.num_bins()) throw InvalidInput("mixture STFT does not match the model");
  const int frames = mixture.frames(), bins = mixture.bins(), mics = mixture.channels();
  const int in_dim = cfg_.attention.input_dim;
  const int out_dim = cfg_.attention.output_dim;

  if (cfg_.variant == Method::kFlSf) {
    const auto x = normalize_frames(vectorize_mixture(mixture), frames, out_dim);
    const ad::Tensor out = ad::reshape(run_network(0, ad::Tensor::constant({1, frames, in_dim}, x)),
                                       {frames, 2, bins * mics});
    return {ad::reshape(ad::slice(out, 1, 0, 1), {frames * bins, mics}),
            ad::reshape(ad::slice(out, 1, 1, 1), {frames * bins, mics})};
  }

  const MaskedPair pair = split_with_mask(mixture, mask);
  const std::vector<double> iscm_x = branch_iscm_vectors(pair.speech_est, cfg_.vectorization);
  const std::vector<double> iscm_n = branch_iscm_vectors(pair.noise_est, cfg_.vectorization);
  std::vector<double> feat = normalize_frames(iscm_x, frames, out_dim);
  const std::vector<double> feat_n = normalize_frames(iscm_n, frames, out_dim);

  // Network outputs per branch, each [T, width].
  ad::Tensor out_x, out_n;
  if (la_.size() + nla_.size() == 1) {
    feat.insert(feat.end(), feat_n.begin(), feat_n.end());
    const ad::Tensor out = run_network(0, ad::Tensor::constant({2, frames, in_dim}, std::move(feat)));
    const int width = out.dim(2);
    out_x = ad::reshape(ad::slice(out, 0, 0, 1), {frames, width});
    out_n = ad::reshape(ad::slice(out, 0, 1, 1), {frames, width});
  } else {
    out_x = run_network(0, ad::Tensor::constant({1, frames, in_dim}, std::move(feat)));
    out_n = run_network(1, ad::Tensor::constant({1, frames, in_dim}, feat_n));
    out_x = ad::reshape(out_x, {frames, out_x.dim(2)});
    out_n = ad::reshape(out_n, {frames, out_n.dim(2)});
  }

  if (cfg_.variant == Method::kLa) {
    out_x = ad::matmul(out_x, ad::Tensor::constant({frames, out_dim}, iscm_x));
    out_n = ad::matmul(out_n, ad::Tensor::constant({frames, out_dim}, iscm_n));
  }
  const ad::CTensor phi_x = expand_scm_tensor(out_x, mics, bins, cfg_.vectorization);
  const ad::CTensor phi_n = expand_scm_tensor(out_n, mics, bins, cfg_.vectorization);
  if (cfg_.variant == Method::kIc) return ic_mvdr_tensor(phi_x, phi_n, cfg_.reference);
  return mvdr_tensor(phi_x, phi_n, cfg_.reference, cfg_.mvdr);
}

ad::Tensor SpatialFilterModel::forward(const Spectrogram& mixture, const Mask& mask) const {
  const ad::CTensor z = apply_filter_tensor(filter_tensor(mixture, mask), mixture);
  return ad::istft(z.re, z.im, mixture.config(), mixture.num_samples());
}

FilterField SpatialFilterModel::filters(const Spectrogram& mixture, const Mask& mask) const {
  ad::NoGradGuard no_grad;
  const ad::CTensor h = filter_tensor(mixture, mask);
  FilterField out(mixture.bins(), mixture.frames(), mixture.channels());
  const int bins = mixture.bins(), mics = mixture.channels();
  for (int t = 0; t < mixture.frames(); ++t)
    for (int f = 0; f < bins; ++f)
      for (int m = 0; m < mics; ++m) {
        const std::size_t o = (std::size_t(t) * bins + f) * mics + m;
        out(f, t, m) = cplx(h.re.values()[o], h.im.values()[o]);
      }
  return out;
}

Spectrogram SpatialFilterModel::enhance(const Spectrogram& mixture, const Mask& mask) const {
  return apply_filter(mixture, filters(mixture, mask));
}

void SpatialFilterModel::save(const std::string& path) const {
  cfg_.save(path + ".cfg");
  save_checkpoint(path, params_);
}

std::unique_ptr<SpatialFilterModel> SpatialFilterModel::load(const std::string& path) {
  auto model = std::make_unique<SpatialFilterModel>(ModelConfig::load(path + ".cfg"));
  load_checkpoint(path, model->params_);
  return model;
}

}  // namespace attnbf
