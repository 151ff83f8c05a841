#pragma once

// Minimal RFC 4180 CSV: comma separator, double-quote quoting with "" escapes,
// quoted fields may span lines.

#include <cstddef>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polydedup::csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based physical line where the record starts
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Returns std::nullopt at end of input. Throws std::runtime_error on an
    // unterminated quote or garbage after a closing quote; the caller maps it.
    std::optional<Row> next() {
        Row row;
        std::string field;
        bool in_quotes = false;
        bool after_quote = false;
        bool any = false;
        row.line = line_;
        for (;;) {
            int c = in_.get();
            if (c == EOF) {
                if (in_quotes) throw std::runtime_error("unterminated quoted field");
                if (!any) return std::nullopt;
                row.fields.push_back(std::move(field));
                return row;
            }
            any = true;
            char ch = static_cast<char>(c);
            if (in_quotes) {
                if (ch == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        in_quotes = false;
                        after_quote = true;
                    }
                } else {
                    if (ch == '\n') ++line_;
                    field.push_back(ch);
                }
                continue;
            }
            if (ch == ',') {
                row.fields.push_back(std::move(field));
                field.clear();
                after_quote = false;
            } else if (ch == '\n' || ch == '\r') {
                if (ch == '\r' && in_.peek() == '\n') in_.get();
                ++line_;
                if (row.fields.empty() && field.empty() && !after_quote) {
                    // blank line
                    row.line = line_;
                    any = false;
                    continue;
                }
                row.fields.push_back(std::move(field));
                return row;
            } else if (ch == '"' && field.empty() && !after_quote) {
                in_quotes = true;
            } else {
                if (after_quote) throw std::runtime_error("unexpected character after closing quote");
                field.push_back(ch);
            }
        }
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 1;
};

inline std::string escape(std::string_view field) {
    bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

}  // namespace polydedup::csv
