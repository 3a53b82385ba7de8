#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rah::text {

/// Backslash-escapes tab, newline, carriage return and backslash so a value
/// fits in one tab-separated field.
std::string escape(std::string_view s);
std::string unescape(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string lower(std::string_view s);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

} // namespace rah::text
