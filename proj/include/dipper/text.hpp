#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dipper {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value);

std::optional<double> parse_double(std::string_view text);

std::vector<std::string_view> split_line(std::string_view line, char delimiter);
std::string_view trim(std::string_view text);

}  // namespace dipper
