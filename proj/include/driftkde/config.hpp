#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftkde {

/// Raised for any problem with a configuration file; the message carries the
/// offending line or key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration with `#` comments. Every key must be
/// consumed by a typed accessor; leftover keys are hard errors, so a typo
/// never silently falls back to a default.
class Config {
 public:
  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>") {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string stripped = strip_comment(line);
      const std::string trimmed = trim(stripped);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected `key = value`, got: " + trimmed);
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty key");
      }
      if (cfg.entries_.count(key)) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": duplicate key `" + key + "`");
      }
      cfg.entries_[key] = {value, lineno, false};
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str(), path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw ConfigError(origin_ + ": missing required key `" + key + "`");
    }
    it->second.consumed = true;
    return it->second.value;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) {
    return to_double(key, get_string(key));
  }
  double get_double(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
  }

  long get_long(const std::string& key) {
    const std::string v = get_string(key);
    long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
      throw ConfigError(origin_ + ": key `" + key +
                        "`: expected an integer, got `" + v + "`");
    }
    return out;
  }
  long get_long(const std::string& key, long fallback) {
    return has(key) ? get_long(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(origin_ + ": key `" + key + "`: expected a boolean, got `" +
                      v + "`");
  }

  std::vector<double> get_double_list(const std::string& key) {
    const std::string v = get_string(key);
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const auto comma = v.find(',', pos);
      const std::string tok =
          trim(v.substr(pos, comma == std::string::npos ? v.size() - pos
                                                        : comma - pos));
      if (!tok.empty()) out.push_back(to_double(key, tok));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (out.empty()) {
      throw ConfigError(origin_ + ": key `" + key + "`: empty list");
    }
    return out;
  }

  /// Hard-errors on keys that no accessor consumed (typo protection).
  void require_all_consumed() const {
    for (const auto& [key, e] : entries_) {
      if (!e.consumed) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) +
                          ": unknown key `" + key + "`");
      }
    }
  }

  /// All key = value pairs in sorted key order, for header echoes.
  std::vector<std::pair<std::string, std::string>> items() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, e] : entries_) out.emplace_back(key, e.value);
    return out;
  }

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool consumed = false;
  };

  double to_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key `" + key +
                        "`: expected a number, got `" + v + "`");
    }
  }

  static std::string strip_comment(const std::string& s) {
    const auto h = s.find('#');
    return h == std::string::npos ? s : s.substr(0, h);
  }

  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  std::map<std::string, Entry> entries_;
  std::string origin_;
};

}  // namespace driftkde
