// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/optim.h"

#include <bit>
#include <cmath>
#include <algorithm>
#include <cstring>
#include <fstream>

#include "attnbf/error.h"

namespace attnbf {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4B434241;  // "ABCK"
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated checkpoint " + path);
  return v;
}

}  // namespace

void ParameterSet::add(Parameter p) {
  if (find(p.name)) throw ConfigError("duplicate parameter name " + p.name);
  params_.push_back(std::move(p));
}

ad::Tensor ParameterSet::create(const std::string& name, ad::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(ad::numel(shape));
  for (double& v : values) v = dist(rng);
  auto t = ad::Tensor::leaf(std::move(shape), std::move(values), true);
  add({name, t});
  return t;
}

ad::Tensor ParameterSet::create_constant(const std::string& name, ad::Shape shape, double value) {
  const std::size_t n = ad::numel(shape);
  auto t = ad::Tensor::leaf(std::move(shape), std::vector<double>(n, value), true);
  add({name, t});
  return t;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void adam_step(std::vector<std::vector<double>*>& values, const std::vector<const std::vector<double>*>& grads,
               const AdamConfig& cfg, AdamState& state) {
  if (values.size() != grads.size()) throw InvalidInput("adam_step: values/grads count mismatch");
  if (state.m.empty()) {
    for (auto* v : values) {
      state.m.emplace_back(v->size(), 0.0);
      state.v.emplace_back(v->size(), 0.0);
    }
  }
  if (state.m.size() != values.size()) throw InvalidInput("adam_step: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < values.size(); ++p) {
    auto& w = *values[p];
    auto& m = state.m[p];
    auto& v = state.v[p];
    if (m.size() != w.size()) throw InvalidInput("adam_step: state shape mismatch");
    const std::vector<double>* g = grads[p];
    const bool has_grad = g && !g->empty();
    if (has_grad && g->size() != w.size()) throw InvalidInput("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? (*g)[i] : 0.0;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      w[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

void Adam::step() {
  std::vector<std::vector<double>*> values;
  std::vector<const std::vector<double>*> grads;
  for (auto& p : params_.params()) {
    values.push_back(&p.tensor.mutable_values());
    grads.push_back(&p.tensor.grad());
  }
  adam_step(values, grads, cfg_, state_);
}

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  put<std::uint32_t>(os, kCheckpointMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.values.size() != ad::numel(t.shape)) throw InvalidInput("save_tensors: shape/value mismatch for " + t.name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint8_t>(os, kDtypeF64);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 8));
  }
  if (!os) throw IoError("write failed for " + path);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  if (get<std::uint32_t>(is, path) != kCheckpointMagic) throw IoError("not a checkpoint: " + path);
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(is, path);
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw IoError("corrupt tensor name in " + path);
    t.name.resize(len);
    if (!is.read(t.name.data(), len)) throw IoError("truncated checkpoint " + path);
    if (get<std::uint8_t>(is, path) != kDtypeF64) throw IoError("unsupported dtype for " + t.name);
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 16) throw IoError("corrupt rank for " + t.name);
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(static_cast<int>(get<std::uint32_t>(is, path)));
    t.values.resize(ad::numel(t.shape));
    if (!is.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 8)))
      throw IoError("truncated checkpoint " + path);
    out.push_back(std::move(t));
  }
  return out;
}

void save_checkpoint(const std::string& path, const ParameterSet& params) {
  std::vector<NamedTensor> tensors;
  for (const auto& p : params.params()) tensors.push_back({p.name, p.tensor.shape(), p.tensor.values()});
  save_tensors(path, tensors);
}

void load_checkpoint(const std::string& path, ParameterSet& params) {
  const auto tensors = load_tensors(path);
  for (auto& p : params.params()) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == p.name; });
    if (it == tensors.end()) throw IoError("checkpoint " + path + " has no tensor " + p.name);
    if (it->shape != p.tensor.shape())
      throw IoError("shape mismatch for " + p.name + ": " + ad::to_string(it->shape) + " vs " +
                    ad::to_string(p.tensor.shape()));
    p.tensor.mutable_values() = it->values;
  }
}

}  // namespace attnbf
