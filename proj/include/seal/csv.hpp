#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seal::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it needs it.
std::string escape_field(std::string_view field);

std::string join_line(const std::vector<std::string>& fields);

/// Locale-independent parse of a full cell; nullopt when the cell is not a number.
std::optional<double> parse_double(std::string_view text);

/// Shortest-width text that parses back to the identical double; non-finite values print as NaN/inf.
std::string format_double(double value);

/// Reads a text file into lines, dropping a trailing '\r' and a UTF-8 byte-order mark.
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view content);

}  // namespace seal::csv
