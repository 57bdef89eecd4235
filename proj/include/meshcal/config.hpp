#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace meshcal::cfg {

/// One `key = value` assignment from a config file. Keys may repeat
/// (e.g. several `obstacle` lines in a scenario file).
struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

class KeyValues {
public:
  KeyValues() = default;
  explicit KeyValues(std::vector<Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::vector<std::string> get_all(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  // Same as the fallback getters but throw ConfigError when absent.
  double require_double(const std::string& key) const;
  std::string require_string(const std::string& key) const;

  const std::vector<Entry>& entries() const { return entries_; }

private:
  std::vector<Entry> entries_;
};

/// Parses `key = value` lines; '#' starts a comment, blank lines are
/// ignored. Throws ConfigError on malformed lines or unreadable files.
KeyValues parse_config(std::istream& in);
KeyValues parse_config_file(const std::string& path);

/// Splits a value like "1.5 2.0; 3 4" into whitespace-token groups
/// separated by ';'. Used for position and rectangle lists.
std::vector<std::vector<double>> parse_number_groups(const std::string& value);

}  // namespace meshcal::cfg
