#ifndef BGL_CSV_HPP
#define BGL_CSV_HPP

// Minimal RFC 4180 reader and writer: quoted fields may contain the
// delimiter, doubled quotes and line breaks.

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bgl/errors.hpp"

namespace bgl::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line on which the record starts
};

class Reader {
 public:
  Reader(std::istream& in, char delimiter) : in_(in), delimiter_(delimiter) {}

  /// Next record, or nullopt at end of input. Throws io_error on an
  /// unterminated quoted field.
  std::optional<Row> next() {
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    ++line_;
    Row row;
    row.line = line_;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (;;) {
      if (!line.empty() && line.back() == '\r' && !quoted) line.pop_back();
      for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        any = true;
        if (quoted) {
          if (c == '"') {
            if (i + 1 < line.size() && line[i + 1] == '"') {
              field += '"';
              ++i;
            } else {
              quoted = false;
            }
          } else {
            field += c;
          }
        } else if (c == '"') {
          quoted = true;
        } else if (c == delimiter_) {
          row.fields.push_back(std::move(field));
          field.clear();
        } else {
          field += c;
        }
      }
      if (!quoted) break;
      if (!std::getline(in_, line)) {
        throw bgl::io_error("csv: unterminated quoted field starting on line " + std::to_string(row.line));
      }
      ++line_;
      field += '\n';
    }
    if (any || !row.fields.empty()) row.fields.push_back(std::move(field));
    return row;
  }

  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  char delimiter_;
  std::size_t line_ = 0;
};

inline std::string quote(std::string_view field, char delimiter = ',') {
  if (field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string join(const std::vector<std::string>& fields, char delimiter = ',') {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += delimiter;
    out += quote(fields[i], delimiter);
  }
  return out;
}

}  // namespace bgl::csv

#endif
