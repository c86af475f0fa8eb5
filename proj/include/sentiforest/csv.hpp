#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sentiforest/common.hpp"

namespace sentiforest::csv {

/// RFC-4180 record reader. Quoted fields may contain separators, doubled
/// quotes and line breaks; CRLF and LF line endings are both accepted.
class Reader {
public:
    explicit Reader(std::istream& in, char separator = ',') : in_(in), sep_(separator) {}

    /// Reads the next record into `fields`. Returns false at end of input.
    bool next(std::vector<std::string>& fields) {
        fields.clear();
        int c = in_.get();
        if (c == std::char_traits<char>::eof()) return false;
        record_line_ = line_ + 1;
        std::string field;
        bool quoted = false;
        bool after_quote = false;
        for (;; c = in_.get()) {
            if (c == std::char_traits<char>::eof()) {
                if (quoted) throw Error(ErrorKind::Parse, where() + "unterminated quoted field");
                fields.push_back(std::move(field));
                ++line_;
                return true;
            }
            const char ch = static_cast<char>(c);
            if (quoted) {
                if (ch == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        quoted = false;
                        after_quote = true;
                    }
                } else {
                    if (ch == '\n') ++line_;
                    field.push_back(ch);
                }
                continue;
            }
            if (ch == sep_) {
                fields.push_back(std::move(field));
                field.clear();
                after_quote = false;
            } else if (ch == '\n' || ch == '\r') {
                if (ch == '\r' && in_.peek() == '\n') in_.get();
                fields.push_back(std::move(field));
                ++line_;
                return true;
            } else if (ch == '"' && field.empty() && !after_quote) {
                quoted = true;
            } else {
                if (after_quote || ch == '"')
                    throw Error(ErrorKind::Parse, where() + "unexpected character after quoted field");
                field.push_back(ch);
            }
        }
    }

    /// 1-based line number on which the most recently read record started.
    std::size_t record_line() const { return record_line_; }

private:
    std::string where() const { return "line " + std::to_string(record_line_) + ": "; }

    std::istream& in_;
    char sep_;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
};

inline std::string quote(std::string_view field, char separator = ',') {
    const bool needs = field.find_first_of(std::string{'"', '\n', '\r', separator}) != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields, char separator = ',') {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(separator);
        out << quote(fields[i], separator);
    }
    out.put('\n');
}

}  // namespace sentiforest::csv
