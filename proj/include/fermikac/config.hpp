#pragma once

#include <map>
#include <string>
#include <vector>

#include "fermikac/kernel.hpp"

namespace fermikac {

/// Flat "dotted.key = value" configuration text. Blank lines and lines
/// starting with '#' are ignored; a repeated key is an error.
class FlatConfig {
 public:
  static FlatConfig parse(const std::string& text);
  static FlatConfig load(const std::string& path);
  /// Keys in sorted order, one "key = value" per line; parse(serialize()) == *this.
  std::string serialize() const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  unsigned long long get_uint(const std::string& key, unsigned long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<long long> get_ints(const std::string& key, const std::vector<long long>& fallback) const;
  /// "x,y,z"
  Vec3 get_vec3(const std::string& key, const Vec3& fallback) const;

  friend bool operator==(const FlatConfig&, const FlatConfig&) = default;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fermikac
