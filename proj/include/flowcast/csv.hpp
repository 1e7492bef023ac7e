#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "flowcast/errors.hpp"

namespace flowcast::csv {

using Row = std::vector<std::string>;

// RFC-4180 record reader. Quoted fields may contain commas, doubled quotes and
// line breaks. CRLF and LF line endings are both accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Returns the next record, or nullopt at end of input.
  std::optional<Row> next() {
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) return std::nullopt;
    ++line_;
    record_line_ = line_;
    Row row;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    while (true) {
      if (c == std::char_traits<char>::eof()) {
        if (quoted) throw ParseError("csv: unterminated quoted field starting on line " +
                                     std::to_string(record_line_));
        row.push_back(std::move(field));
        return row;
      }
      char ch = static_cast<char>(c);
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
      } else if (ch == ',') {
        row.push_back(std::move(field));
        field.clear();
        after_quote = false;
      } else if (ch == '\n' || ch == '\r') {
        if (ch == '\r' && in_.peek() == '\n') in_.get();
        row.push_back(std::move(field));
        return row;
      } else if (ch == '"' && field.empty() && !after_quote) {
        quoted = true;
      } else {
        if (after_quote)
          throw ParseError("csv: unexpected character after closing quote on line " +
                           std::to_string(line_));
        field.push_back(ch);
      }
      c = in_.get();
    }
  }

  // 1-based line on which the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

inline void write_field(std::ostream& out, std::string_view field) {
  bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

inline void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    write_field(out, row[i]);
  }
  out << '\n';
}

}  // namespace flowcast::csv
