// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/run_config.h"

#include <fstream>

#include "attnbf/config.h"
#include "attnbf/error.h"

namespace attnbf {
namespace {

void bind_all(RunConfig& c, ConfigBinder& b) {
  c.simulator.bind(b);
  c.model.bind(b);
  c.train.bind(b);
  b.bind("baseline", "alpha", c.baseline.alpha);
  b.bind("baseline", "window", c.baseline.window);
  b.bind("baseline", "loading", c.baseline.mvdr.loading);
  b.bind("baseline", "reference", c.baseline.ref.index);
}

RunConfig from_entries(const std::vector<ConfigEntry>& entries) {
  RunConfig c;
  ConfigBinder b;
  bind_all(c, b);
  b.apply(entries);
  c.validate();
  return c;
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
  return path.empty() ? from_entries({}) : from_entries(parse_config_file(path));
}

RunConfig RunConfig::from_text(const std::string& text) { return from_entries(parse_config_text(text)); }

void RunConfig::validate() const {
  simulator.validate();
  model.validate();
  AttentionConfig att = model.attention;
  att.input_dim = model.network_input_dim();
  att.output_dim = model.network_output_dim();
  att.validate();
  train.validate();
  if (!(baseline.alpha > 0.0 && baseline.alpha < 1.0)) throw ConfigError("baseline.alpha must be in (0, 1)");
  if (baseline.window < 1) throw ConfigError("baseline.window must be at least 1");
  if (baseline.ref.index < 0) throw ConfigError("baseline.reference must be non-negative");
  if (!(baseline.mvdr.loading >= 0.0)) throw ConfigError("baseline.loading must be non-negative");
}

std::string RunConfig::dump() {
  ConfigBinder b;
  bind_all(*this, b);
  return b.dump();
}

void RunConfig::write(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  out << dump();
  if (!out) throw IoError("cannot write " + path);
}

}  // namespace attnbf
