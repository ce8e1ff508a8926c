#include "clfp/keyvalue.hpp"

#include <charconv>
#include <set>

#include "clfp/errors.hpp"

namespace clfp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw FormatError("line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) throw FormatError("duplicate key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
  return v;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace clfp
