#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace negascope {

struct CsvRow {
    std::size_t line = 0;  // 1-based line where the record starts
    std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
/// newlines. Throws ParseError naming the line of an unterminated quote.
std::vector<CsvRow> parse_csv(std::string_view text);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

/// Quotes a field when it contains a delimiter, quote, line break, or
/// leading/trailing whitespace.
std::string csv_field(std::string_view value);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Fixed 6-significant-digit rendering used by every numeric CSV column.
std::string format_number(double value);

} // namespace negascope
