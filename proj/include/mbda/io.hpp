#ifndef MBDA_IO_HPP
#define MBDA_IO_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mbda::io {

using Row = std::vector<std::string>;

/// Reads a tab- or comma-delimited file. The delimiter is detected from the
/// first non-empty line (tab wins if present). Blank lines are skipped, as
/// are lines starting with '#' when `allow_comments` is set.
[[nodiscard]] std::vector<Row> read_delimited(const std::filesystem::path &path,
                                              bool allow_comments = false);

[[nodiscard]] std::vector<std::string> split(std::string_view line, char delim);
[[nodiscard]] std::string trim(std::string_view s);

[[nodiscard]] double parse_double(std::string_view cell, std::string_view context);
[[nodiscard]] long long parse_integer(std::string_view cell, std::string_view context);

/// Shortest round-trippable decimal form of a double.
[[nodiscard]] std::string format_double(double value);

void write_text(const std::filesystem::path &path, std::string_view content);

}  // namespace mbda::io

#endif
