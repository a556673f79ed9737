#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mimir {

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view text);

/// Shortest decimal text that parses back to exactly `v` ("nan" for NaN).
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace mimir
