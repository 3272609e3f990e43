#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace toxspan::csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line{0}; // 1-based line where the row starts
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// RFC 4180 reader: quoted fields may hold separators, doubled quotes and newlines.
inline std::vector<Row> read(std::istream& in, char separator = ',')
{
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    row.line = 1;
    char c = 0;

    auto end_field = [&] {
        row.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.fields.size() == 1 && row.fields[0].empty())) rows.push_back(std::move(row));
        row = Row{};
        row.line = line;
    };

    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == separator) {
            end_field();
        } else if (c == '\r') {
            if (in.peek() == '\n') continue;
            ++line;
            end_row();
        } else if (c == '\n') {
            ++line;
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field starting on line " + std::to_string(row.line));
    if (field_started || !field.empty() || !row.fields.empty()) end_row();
    return rows;
}

inline std::string quote(const std::string& field, char separator = ',')
{
    if (field.find_first_of(std::string("\"\r\n") + separator) == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

} // namespace toxspan::csv
