// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "attnbf/csv.h"
#include "attnbf/error.h"

namespace attnbf {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

template <typename T>
T parse_number(const std::string& text, const std::string& name) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value '" + text + "' for " + name);
  return v;
}

}  // namespace

std::vector<ConfigEntry> parse_config_text(const std::string& text) {
  std::vector<ConfigEntry> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    ConfigEntry e{section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
    if (!seen.insert({e.section, e.key}).second)
      throw ConfigError("line " + std::to_string(line) + ": duplicate key " + where(e.section, e.key));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

void ConfigBinder::add(Binding b) {
  for (const auto& existing : bindings_)
    if (existing.section == b.section && existing.key == b.key)
      throw ConfigError("key bound twice: " + where(b.section, b.key));
  bindings_.push_back(std::move(b));
}

void ConfigBinder::bind(const std::string& section, const std::string& key, int& target) {
  const std::string name = where(section, key);
  add({section, key, [&target, name](const std::string& v) { target = parse_number<int>(v, name); },
       [&target] { return std::to_string(target); }});
}

void ConfigBinder::bind(const std::string& section, const std::string& key, std::uint64_t& target) {
  const std::string name = where(section, key);
  add({section, key, [&target, name](const std::string& v) { target = parse_number<std::uint64_t>(v, name); },
       [&target] { return std::to_string(target); }});
}

void ConfigBinder::bind(const std::string& section, const std::string& key, double& target) {
  const std::string name = where(section, key);
  add({section, key,
       [&target, name](const std::string& v) {
         // from_chars for double is missing on older toolchains
         std::size_t used = 0;
         try {
           target = std::stod(v, &used);
         } catch (const std::exception&) {
           used = 0;
         }
         if (used == 0 || used != v.size()) throw ConfigError("bad value '" + v + "' for " + name);
       },
       [&target] { return format_double(target); }});
}

void ConfigBinder::bind(const std::string& section, const std::string& key, bool& target) {
  const std::string name = where(section, key);
  add({section, key,
       [&target, name](const std::string& v) {
         if (v == "true" || v == "1" || v == "yes") target = true;
         else if (v == "false" || v == "0" || v == "no") target = false;
         else throw ConfigError("bad boolean '" + v + "' for " + name);
       },
       [&target] { return std::string(target ? "true" : "false"); }});
}

void ConfigBinder::bind(const std::string& section, const std::string& key, std::string& target) {
  add({section, key, [&target](const std::string& v) { target = v; }, [&target] { return target; }});
}

void ConfigBinder::bind_with(const std::string& section, const std::string& key,
                             std::function<void(const std::string&)> set, std::function<std::string()> get) {
  add({section, key, std::move(set), std::move(get)});
}

void ConfigBinder::apply(const std::vector<ConfigEntry>& entries) const {
  for (const auto& e : entries) {
    auto it = std::find_if(bindings_.begin(), bindings_.end(),
                           [&](const Binding& b) { return b.section == e.section && b.key == e.key; });
    if (it == bindings_.end())
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key " + where(e.section, e.key));
    it->set(e.value);
  }
}

std::string ConfigBinder::dump() const {
  std::ostringstream os;
  std::string section = "\x01";
  for (const auto& b : bindings_) {
    if (b.section != section) {
      section = b.section;
      if (!section.empty()) os << (os.tellp() > 0 ? "\n" : "") << "[" << section << "]\n";
    }
    os << b.key << " = " << b.get() << "\n";
  }
  return os.str();
}

}  // namespace attnbf
