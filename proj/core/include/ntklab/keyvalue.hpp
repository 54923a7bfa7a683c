#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ntklab {

/// Ordered `key = value` entries. Blank lines and `#` comments are ignored; duplicate keys
/// and lines without `=` raise ConfigError naming the line.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& entries);

/// Value for `key`, or nullptr.
const std::string* find_value(const KeyValues& entries, const std::string& key);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Shortest decimal form that round-trips (17 significant digits at most).
std::string format_double(double v);

}  // namespace ntklab
