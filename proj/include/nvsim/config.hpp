#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nvsim {

// Flat key-value configuration file:
//
//   # comment
//   rate.gamma_rad = 83.3
//   hf.f0_mhz      = 2877.2
//
// One `key = value` pair per line, `#` starts a comment, keys are
// dot-separated lowercase words. All model files (hyperfine constants,
// rates, calibration targets, experiment defaults) share this format.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& source = "<string>");
  static KeyValueConfig load(const std::string& path);
  void save(const std::string& path) const;
  std::string serialize() const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long value);
  void set_string(const std::string& key, const std::string& value);

  std::vector<std::string> keys() const;
  // Keys never read through a getter; lets callers warn about typos.
  std::vector<std::string> unused_keys() const;

 private:
  std::string raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> accessed_;
  std::string source_ = "<empty>";
};

}  // namespace nvsim
