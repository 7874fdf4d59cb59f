#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace radseek {

// Error raised for malformed config/data files; always names the file,
// the 1-based line and, when known, the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& file, int line, const std::string& key,
              const std::string& what_arg)
      : std::runtime_error(format(file, line, key, what_arg)),
        file_(file),
        line_(line),
        key_(key) {}

  const std::string& file() const { return file_; }
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(const std::string& file, int line,
                            const std::string& key, const std::string& msg);
  std::string file_;
  int line_;
  std::string key_;
};

// Flat `key = value` text config. One schema is shared by all subcommands;
// later assignments override earlier ones, which is how per-run override
// files are layered on top of the defaults.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig load(const std::string& path);

  // parse from text (file name used only for error messages)
  static KeyValueConfig parse(const std::string& text,
                              const std::string& name = "<string>");

  void merge(const KeyValueConfig& overrides);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // whitespace- or comma-separated list of doubles; n > 0 enforces length
  std::vector<double> get_doubles(const std::string& key, int n = -1) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback,
                                  int n = -1) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& name() const { return name_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;
  std::string name_ = "<empty>";
};

}  // namespace radseek
