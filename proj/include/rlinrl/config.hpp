#pragma once
// Flat key-value run configuration: dotted keys, '=' separated, '#' comments,
// UTF-8. One file fully determines a run. Reads are recorded so the resolved
// config (defaults materialized) can be printed and hashed.

#include <map>
#include <string>

namespace rlinrl {

class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  // Required lookups throw ConfigError naming the key.
  std::string get_str(const std::string& key) const;
  double get_num(const std::string& key) const;
  long get_int(const std::string& key) const;

  // Defaulted lookups also record the default into the resolved view.
  std::string get_str(const std::string& key, const std::string& dflt) const;
  double get_num(const std::string& key, double dflt) const;
  long get_int(const std::string& key, long dflt) const;

  // All keys plus every default that was consulted, sorted.
  std::string resolved() const;

 private:
  std::map<std::string, std::string> kv_;
  mutable std::map<std::string, std::string> resolved_;
};

}  // namespace rlinrl
