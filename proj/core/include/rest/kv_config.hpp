#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rest {

/// Flat `key = value` store used for run configs, SCM specs and checkpoint metadata.
///
/// Lines starting with `#` are comments. Keys are kept sorted so serialization
/// is canonical: parse(serialize(x)) == x and serialize is byte-stable.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
  void set_doubles(const std::string& key, const std::vector<double>& values);
  void set_ints(const std::string& key, const std::vector<std::int64_t>& values);

  /// Applies `key=value` override strings (e.g. from the command line).
  void apply_override(std::string_view assignment);
  void merge(const KeyValueConfig& other);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::int64_t> get_ints(const std::string& key,
                                     const std::vector<std::int64_t>& fallback) const;

  /// Every key that is not in `known`. Used to reject typos.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  bool operator==(const KeyValueConfig&) const = default;

 private:
  std::map<std::string, std::string> values_;
};

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

}  // namespace rest
