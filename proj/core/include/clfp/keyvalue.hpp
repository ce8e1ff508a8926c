#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clfp {

// Ordered key=value pairs, one per line. Blank lines and lines starting with
// '#' are ignored; whitespace around keys and values is trimmed.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Throws FormatError on a line without '=' or a repeated key.
KeyValues parse_key_values(std::string_view text);
std::string format_key_values(const KeyValues& kv);

// Typed field readers; throw ConfigError naming the key on bad values.
std::uint64_t parse_unsigned(const std::string& key, const std::string& value);
double parse_real(const std::string& key, const std::string& value);

// Shortest text that parses back to the same double.
std::string format_real(double v);

}  // namespace clfp
