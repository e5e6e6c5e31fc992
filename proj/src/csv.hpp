#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace esave::csv {

// Splits one CSV line. Double-quoted fields may contain commas and
// doubled quotes.
std::vector<std::string> split_line(const std::string& line);

// Lines of a CSV document, tolerating \r\n endings and a trailing newline.
std::vector<std::string> split_lines(const std::string& text);

std::string escape_field(const std::string& field);

// Parses a numeric cell. Blank -> nullopt. Non-numeric, trailing garbage
// or non-finite values -> ParseError referencing `row` (1-based).
std::optional<double> parse_numeric_cell(const std::string& cell, const std::string& column,
                                         std::size_t row);

}  // namespace esave::csv
