// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Flat key = value files with optional [section] headers.
//
//   # comment
//   [attention]
//   model_dim = 256
//
// Keys before the first header belong to the unnamed section "".

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace attnbf {

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

// Throws ConfigError on malformed lines or duplicate keys.
std::vector<ConfigEntry> parse_config_text(const std::string& text);
std::vector<ConfigEntry> parse_config_file(const std::string& path);

// Maps (section, key) pairs onto typed variables. apply() rejects keys that
// were never bound; dump() renders the current values of every binding in
// registration order.
class ConfigBinder {
 public:
  void bind(const std::string& section, const std::string& key, int& target);
  void bind(const std::string& section, const std::string& key, double& target);
  void bind(const std::string& section, const std::string& key, bool& target);
  void bind(const std::string& section, const std::string& key, std::string& target);
  void bind(const std::string& section, const std::string& key, std::uint64_t& target);
  // Custom conversions, e.g. for enums.
  void bind_with(const std::string& section, const std::string& key, std::function<void(const std::string&)> set,
                 std::function<std::string()> get);

  void apply(const std::vector<ConfigEntry>& entries) const;
  std::string dump() const;

 private:
  struct Binding {
    std::string section;
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };
  void add(Binding b);
  std::vector<Binding> bindings_;
};

}  // namespace attnbf
