#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace maga {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Shortest round-trip decimal representation.
std::string format_double(double value);
/// Fixed-point with `decimals` digits, half-up on the decimal string.
std::string format_fixed(double value, int decimals);
/// Half-up rounding to `decimals` places (ties away from zero).
double round_half_up(double value, int decimals);

/// Minimal CSV row splitter: comma separated, optional double quotes.
std::vector<std::string> split_csv_row(std::string_view row);
std::vector<std::vector<std::string>> parse_csv(std::string_view content);
std::string csv_escape(std::string_view field);

std::string trim(std::string_view s);

}  // namespace maga
