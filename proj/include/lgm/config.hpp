#pragma once

// Sectioned key=value config files.
//
//   # comment
//   [section]
//   key = value
//
// One nesting level only. Keys are unique within their section. Values are
// taken verbatim after trimming surrounding whitespace; typed getters parse
// on demand.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lgm/csv.hpp"
#include "lgm/errors.hpp"

namespace lgm {

class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::string& origin) {
    Config cfg;
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
      pos = eol + 1;
      ++lineno;
      if (line.empty() || line.front() == '#') continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw BadConfig(origin + ":" + fmt_int((std::int64_t)lineno) + ": unterminated section header");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        if (section.empty())
          throw BadConfig(origin + ":" + fmt_int((std::int64_t)lineno) + ": empty section name");
        continue;
      }
      std::size_t eq = line.find('=');
      if (eq == std::string_view::npos)
        throw BadConfig(origin + ":" + fmt_int((std::int64_t)lineno) + ": expected key = value");
      std::string key = std::string(trim(line.substr(0, eq)));
      std::string value = std::string(trim(line.substr(eq + 1)));
      if (key.empty())
        throw BadConfig(origin + ":" + fmt_int((std::int64_t)lineno) + ": empty key");
      if (section.empty())
        throw BadConfig(origin + ":" + fmt_int((std::int64_t)lineno) +
                        ": key outside any [section]");
      auto full = section + "." + key;
      if (!cfg.values_.emplace(full, value).second)
        throw BadConfig(origin + ":" + fmt_int((std::int64_t)lineno) + ": duplicate key " + full);
      cfg.order_.push_back(full);
    }
    return cfg;
  }

  static Config load(const std::string& path) { return parse(read_file(path), path); }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw BadConfig("missing config key: " + key);
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const {
    return parse_double(get_string(key), "config key " + key);
  }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::int64_t get_int(const std::string& key) const {
    return parse_int(get_string(key), "config key " + key);
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    auto v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw BadConfig("config key " + key + " is not a boolean: " + v);
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    // keep the value alive past split_view: the views point into it
    const std::string value = get_string(key);
    for (auto part : split_view(value, ' '))
      if (!part.empty()) out.emplace_back(part);
    return out;
  }

  // Keys under "section." in file order, with the prefix stripped.
  std::vector<std::string> section_keys(const std::string& section) const {
    std::vector<std::string> out;
    const std::string prefix = section + ".";
    for (const auto& k : order_)
      if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

// Writes sectioned key=value files with deterministic ordering (insertion
// order, sections grouped as emitted).
class ConfigWriter {
 public:
  void section(const std::string& name) { out_ += "[" + name + "]\n"; }
  void kv(const std::string& key, const std::string& value) {
    out_ += key + " = " + value + "\n";
  }
  void kv(const std::string& key, double value) { kv(key, fmt_double(value)); }
  void kv(const std::string& key, std::int64_t value) { kv(key, fmt_int(value)); }
  void kv(const std::string& key, int value) { kv(key, fmt_int(value)); }
  void blank() { out_ += "\n"; }
  const std::string& str() const { return out_; }
  void save(const std::string& path) const { write_file(path, out_); }

 private:
  std::string out_;
};

}  // namespace lgm
