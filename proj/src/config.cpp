#include "rlinrl/config.hpp"

#include <cstdlib>
#include <sstream>

#include "rlinrl/errors.hpp"
#include "rlinrl/io.hpp"

namespace rlinrl {

namespace {
std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    c.kv_[key] = val;
  }
  return c;
}

Config Config::load(const std::string& path) { return parse(read_text(path)); }

std::string Config::get_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing config key: " + key);
  resolved_[key] = it->second;
  return it->second;
}

double Config::get_num(const std::string& key) const {
  std::string s = get_str(key);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ConfigError("config key " + key + ": not a number: '" + s + "'");
  return v;
}

long Config::get_int(const std::string& key) const {
  double v = get_num(key);
  long i = static_cast<long>(v);
  if (static_cast<double>(i) != v)
    throw ConfigError("config key " + key + ": not an integer");
  return i;
}

std::string Config::get_str(const std::string& key, const std::string& dflt) const {
  auto it = kv_.find(key);
  std::string v = it == kv_.end() ? dflt : it->second;
  resolved_[key] = v;
  return v;
}

double Config::get_num(const std::string& key, double dflt) const {
  if (!has(key)) {
    std::ostringstream os;
    os << dflt;
    resolved_[key] = os.str();
    return dflt;
  }
  return get_num(key);
}

long Config::get_int(const std::string& key, long dflt) const {
  if (!has(key)) {
    resolved_[key] = std::to_string(dflt);
    return dflt;
  }
  return get_int(key);
}

std::string Config::resolved() const {
  std::map<std::string, std::string> all = resolved_;
  for (const auto& [k, v] : kv_) all.emplace(k, v);
  std::string out;
  for (const auto& [k, v] : all) out += k + " = " + v + "\n";
  return out;
}

}  // namespace rlinrl
