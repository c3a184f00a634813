#include "negascope/csv.hpp"

#include "negascope/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace negascope {

std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t quote_line = 0;
    row.line = 1;

    auto end_field = [&] {
        row.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        const bool blank = row.fields.size() == 1 && row.fields[0].empty();
        if (!blank) rows.push_back(std::move(row));
        row = CsvRow{};
    };

    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
        case '"':
            if (field_started && !field.empty()) {
                throw ParseError("line " + std::to_string(line) +
                                 ": quote inside an unquoted field");
            }
            in_quotes = true;
            field_started = true;
            quote_line = line;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            end_row();
            ++line;
            row.line = line;
            break;
        default:
            field.push_back(ch);
            field_started = true;
        }
    }
    if (in_quotes) {
        throw ParseError("line " + std::to_string(quote_line) + ": unterminated quoted field");
    }
    if (field_started || !row.fields.empty()) end_row();
    return rows;
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_csv(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string csv_field(std::string_view value) {
    const bool needs_quotes =
        value.find_first_of(",\"\r\n") != std::string_view::npos ||
        (!value.empty() && (value.front() == ' ' || value.back() == ' ' ||
                            value.front() == '\t' || value.back() == '\t'));
    if (!needs_quotes) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_field(fields[i]);
    }
    out << '\n';
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (value == 0.0) return "0";  // folds -0
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

} // namespace negascope
