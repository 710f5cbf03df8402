#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dmps {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);
/// Strict parse of a whole token; throws ConfigError on junk.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
bool parse_bool(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);

/// Writes `content` to `path` through a temporary file and a rename, so
/// readers never observe a half-written file.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace dmps
