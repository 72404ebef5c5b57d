// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Everything a command-line run can be configured with, read from one
// key = value file with sections [simulator], [model], [attention], [stft],
// [train] and [baseline]. Missing keys keep their defaults.

#pragma once

#include <string>

#include "attnbf/pipeline.h"
#include "attnbf/simulator.h"
#include "attnbf/train_eval.h"

namespace attnbf {

struct RunConfig {
  SimulatorConfig simulator;
  ModelConfig model;  // also supplies the STFT used by the baselines
  TrainConfig train;
  BaselineOptions baseline;

  // Applies a config file (empty path: defaults only). Throws ConfigError on
  // unknown keys, bad values or failed validation.
  static RunConfig load(const std::string& path);
  static RunConfig from_text(const std::string& text);

  void validate() const;
  // Every key with its effective value, in the same format load() reads.
  std::string dump();
  void write(const std::string& path);
};

}  // namespace attnbf
