#include "meshcal/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "meshcal/errors.hpp"

namespace meshcal::cfg {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

bool KeyValues::has(const std::string& key) const {
  return get(key).has_value();
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return e.value;
  return std::nullopt;
}

std::vector<std::string> KeyValues::get_all(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.key == key) out.push_back(e.value);
  return out;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    double d = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + *v + "'");
  }
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    int i = std::stoi(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return i;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + *v + "'");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::string KeyValues::get_string(const std::string& key,
                                  const std::string& fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

double KeyValues::require_double(const std::string& key) const {
  if (!has(key)) throw ConfigError("missing required key '" + key + "'");
  return get_double(key, 0.0);
}

std::string KeyValues::require_string(const std::string& key) const {
  auto v = get(key);
  if (!v) throw ConfigError("missing required key '" + key + "'");
  return *v;
}

KeyValues parse_config(std::istream& in) {
  std::vector<Entry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    Entry e;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    entries.push_back(std::move(e));
  }
  return KeyValues(std::move(entries));
}

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::vector<std::vector<double>> parse_number_groups(const std::string& value) {
  std::vector<std::vector<double>> groups;
  std::stringstream ss(value);
  std::string group;
  while (std::getline(ss, group, ';')) {
    std::stringstream gs(group);
    std::vector<double> nums;
    std::string tok;
    while (gs >> tok) {
      // tolerate commas between numbers
      tok.erase(std::remove(tok.begin(), tok.end(), ','), tok.end());
      if (tok.empty()) continue;
      try {
        nums.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + tok + "'");
      }
    }
    if (!nums.empty()) groups.push_back(std::move(nums));
  }
  return groups;
}

}  // namespace meshcal::cfg
