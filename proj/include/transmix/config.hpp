#ifndef TRANSMIX_CONFIG_HPP
#define TRANSMIX_CONFIG_HPP

// Key/value configuration files.
//
//   # comment
//   seed = 7
//   [simulate]
//   transition = [[0.8, 0.2], [0.3, 0.7]]
//   noise = "laplace"
//
// Values are JSON literals; bare words such as `auto` are read as strings.
// Keys under a [section] header are stored as "section.key". Dashes in keys
// are normalized to underscores. A file whose content is a JSON object is
// accepted as well, so an echoed configuration can be fed back unchanged.

#include <cctype>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "transmix/errors.hpp"
#include "transmix/io.hpp"

namespace transmix {

using ConfigMap = std::map<std::string, nlohmann::json>;

inline std::string normalize_key(std::string_view key) {
  std::string out(key);
  for (char& c : out) {
    if (c == '-') c = '_';
  }
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') return false;
  }
  return true;
}

// Drops a trailing comment, ignoring '#' inside double-quoted strings.
inline std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline void flatten(const nlohmann::json& obj, const std::string& prefix, ConfigMap& out) {
  for (const auto& [key, value] : obj.items()) {
    const std::string name = prefix.empty() ? normalize_key(key) : prefix + "." + normalize_key(key);
    if (value.is_object()) flatten(value, name, out);
    else out[name] = value;
  }
}

}  // namespace detail

inline ConfigMap parse_config(std::string_view text, const std::string& name) {
  ConfigMap out;
  const std::string_view body = detail::trim(text);
  if (body.starts_with("{")) {
    try {
      detail::flatten(nlohmann::json::parse(body), "", out);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(name + ": " + e.what());
    }
    return out;
  }
  std::string section;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = detail::trim(detail::strip_comment(text.substr(pos, end - pos)));
    pos = end + 1;
    ++line_no;
    const std::string where = name + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = normalize_key(detail::trim(line.substr(1, line.size() - 2)));
      if (!detail::is_identifier(section)) throw ConfigError(where + ": bad section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string_view raw_key = detail::trim(line.substr(0, eq));
    const std::string_view raw_value = detail::trim(line.substr(eq + 1));
    if (!detail::is_identifier(raw_key)) throw ConfigError(where + ": bad key '" + std::string(raw_key) + "'");
    if (raw_value.empty()) throw ConfigError(where + ": missing value");
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw_value);
    } catch (const nlohmann::json::exception&) {
      if (!detail::is_identifier(raw_value)) {
        throw ConfigError(where + ": cannot parse value '" + std::string(raw_value) + "'");
      }
      value = std::string(raw_value);
    }
    const std::string key = section.empty() ? normalize_key(raw_key) : section + "." + normalize_key(raw_key);
    if (out.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    out[key] = std::move(value);
  }
  return out;
}

inline ConfigMap load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.string());
}

/// Looks up `section.key`, then `key`.
inline const nlohmann::json* config_lookup(const ConfigMap& cfg, const std::string& section, const std::string& key) {
  if (!section.empty()) {
    if (auto it = cfg.find(section + "." + key); it != cfg.end()) return &it->second;
  }
  if (auto it = cfg.find(key); it != cfg.end()) return &it->second;
  return nullptr;
}

}  // namespace transmix

#endif  // TRANSMIX_CONFIG_HPP
