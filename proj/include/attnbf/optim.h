// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "attnbf/autodiff.h"

namespace attnbf {

struct Parameter {
  std::string name;
  ad::Tensor tensor;
};

// Ordered collection of named trainable tensors. Names are unique.
class ParameterSet {
 public:
  // Registers a new leaf initialized uniform(-bound, bound).
  ad::Tensor create(const std::string& name, ad::Shape shape, double bound, std::mt19937_64& rng);
  ad::Tensor create_constant(const std::string& name, ad::Shape shape, double value);

  const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& params() { return params_; }
  const Parameter* find(const std::string& name) const;
  std::size_t num_values() const;
  void zero_grad();

 private:
  void add(Parameter p);
  std::vector<Parameter> params_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First and second moments per parameter plus the step counter.
struct AdamState {
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update of `values` given `grads`. A parameter with
// an empty gradient vector is treated as having zero gradient.
void adam_step(std::vector<std::vector<double>*>& values, const std::vector<const std::vector<double>*>& grads,
               const AdamConfig& cfg, AdamState& state);

class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig cfg) : params_(params), cfg_(cfg) {}
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }

 private:
  ParameterSet& params_;
  AdamConfig cfg_;
  AdamState state_;
};

// Named float64 tensors in the versioned checkpoint layout: header magic,
// version, count (u32 LE), then per tensor: name length, name bytes, dtype
// tag (u8), rank, dims (u32 LE) and little-endian values.
struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

void save_checkpoint(const std::string& path, const ParameterSet& params);
// Copies stored values into matching parameters. Throws IoError when a name
// is missing or a shape differs.
void load_checkpoint(const std::string& path, ParameterSet& params);

}  // namespace attnbf
