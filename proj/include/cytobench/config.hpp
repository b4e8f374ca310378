#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace cytobench {

// Flat `key = value` settings. '#' starts a comment, blank lines are ignored,
// keys are case-sensitive. Later set() calls override parsed values, which is
// how command-line flags win over a config file.
class Config {
 public:
  // Throws ParseError (with byte offset) on a line without '=', an empty key
  // or a repeated key.
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  // Numeric accessors; throw ParseError when the value is not a number.
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;

  // Throws InvalidArgument naming the first key not listed in `known`.
  void require_known(std::span<const std::string_view> known) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Sorted `key = value` lines; parse(to_string()) reproduces the entries.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> entries_;
};

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace cytobench
