#ifndef TRANSMIX_IO_HPP
#define TRANSMIX_IO_HPP

// File helpers for the command-line tool: single-column CSV series, exact
// decimal formatting and input digests.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "transmix/ecf.hpp"
#include "transmix/errors.hpp"

namespace transmix::io {

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("error writing " + path.string());
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
  return out;
}

/// Parses one value per line. Blank lines are ignored; with `header` the
/// first non-blank line is skipped. A trailing comma-separated remainder is
/// rejected so multi-column files fail loudly.
inline std::vector<double> parse_series(std::string_view text, bool header, const std::string& name) {
  std::vector<double> values;
  std::size_t line_no = 0, pos = 0;
  bool skipped = !header;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    if (line.empty()) continue;
    if (!skipped) {
      skipped = true;
      continue;
    }
    double v = 0.0;
    const char* first = line.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, line.data() + line.size(), v);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size()) {
      throw IoError(name + ":" + std::to_string(line_no) + ": not a number: '" + std::string(line) + "'");
    }
    values.push_back(v);
  }
  return values;
}

inline Series read_series_csv(const std::filesystem::path& path, bool header) {
  const std::string text = read_file(path);
  std::vector<double> values = parse_series(text, header, path.string());
  if (values.empty()) throw IoError(path.string() + ": no observations");
  if (values.size() < 2) throw IoError(path.string() + ": need at least two observations");
  try {
    return Series(std::move(values));
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline std::string series_csv(const std::vector<double>& values) {
  std::string out;
  for (double v : values) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

}  // namespace transmix::io

#endif  // TRANSMIX_IO_HPP
