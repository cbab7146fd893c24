#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace ambitwin::text {

/// Locale-independent decimal rendering, `digits` significant digits.
/// 17 digits round-trip every finite double exactly.
inline std::string format_double(double value, int digits = 17) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, digits);
  if (ec != std::errc{}) {
    return "nan";
  }
  return std::string(buf, end);
}

/// Fixed-point rendering with `decimals` digits after the point.
inline std::string format_fixed(double value, int decimals) {
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
  if (ec != std::errc{}) {
    return "nan";
  }
  return std::string(buf, end);
}

/// Parses the whole token as a double, or nothing.
inline std::optional<double> parse_double(std::string_view token) {
  if (token.empty()) {
    return std::nullopt;
  }
  if (token.front() == '+') {
    token.remove_prefix(1);
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    return std::nullopt;
  }
  return value;
}

inline std::optional<std::int64_t> parse_int(std::string_view token) {
  if (token.empty()) {
    return std::nullopt;
  }
  if (token.front() == '+') {
    token.remove_prefix(1);
  }
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    return std::nullopt;
  }
  return value;
}

/// Splits on runs of spaces/tabs; drops a trailing '\r'.
inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
      ++j;
    }
    if (j > i) {
      out.push_back(line.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

inline std::vector<std::string_view> split_char(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

} // namespace ambitwin::text
