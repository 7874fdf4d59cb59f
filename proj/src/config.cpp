#include "radseek/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace radseek {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string ConfigError::format(const std::string& file, int line,
                                const std::string& key,
                                const std::string& msg) {
  std::ostringstream os;
  os << file << ":" << line;
  if (!key.empty()) os << ": key '" << key << "'";
  os << ": " << msg;
  return os.str();
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path, 0, "", "cannot open file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text,
                                     const std::string& name) {
  KeyValueConfig cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name, lineno, "", "expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(name, lineno, "", "empty key");
    }
    if (value.empty()) {
      throw ConfigError(name, lineno, key, "empty value");
    }
    cfg.entries_[key] = value;
    cfg.lines_[key] = lineno;
  }
  return cfg;
}

void KeyValueConfig::merge(const KeyValueConfig& overrides) {
  for (const auto& [k, v] : overrides.entries_) {
    entries_[k] = v;
    auto it = overrides.lines_.find(k);
    lines_[k] = it == overrides.lines_.end() ? 0 : it->second;
  }
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
  lines_[key] = 0;
}

bool KeyValueConfig::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

void KeyValueConfig::fail(const std::string& key,
                          const std::string& msg) const {
  auto it = lines_.find(key);
  throw ConfigError(name_, it == lines_.end() ? 0 : it->second, key, msg);
}

std::string KeyValueConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(key, "missing required key");
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') fail(key, "not a number: '" + v + "'");
  return x;
}

double KeyValueConfig::get_double(const std::string& key,
                                  double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long KeyValueConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') fail(key, "not an integer: '" + v + "'");
  return x;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(key, "not a boolean: '" + v + "'");
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                int n) const {
  std::string v = get_string(key);
  for (auto& c : v) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      fail(key, "not a number: '" + tok + "'");
    }
    out.push_back(x);
  }
  if (n > 0 && static_cast<int>(out.size()) != n) {
    std::ostringstream os;
    os << "expected " << n << " values, got " << out.size();
    fail(key, os.str());
  }
  return out;
}

std::vector<double> KeyValueConfig::get_doubles(
    const std::string& key, const std::vector<double>& fallback, int n) const {
  return has(key) ? get_doubles(key, n) : fallback;
}

}  // namespace radseek
