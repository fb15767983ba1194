#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medsim/core/error.hpp"

namespace medsim::csv {

// RFC 4180 style delimited table: quoted fields may contain the delimiter,
// doubled quotes and newlines. The first record is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error("schema_mismatch", "missing column '" + std::string(name) + "'");
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline Table read(std::istream& in, char delim = ',') {
  Table table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, field_started = false, any = false;
  std::size_t line = 1, record_line = 1;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    bool blank = record.size() == 1 && record[0].empty() && !field_started;
    if (!blank) {
      if (table.header.empty() && table.rows.empty() && !any) {
        table.header = std::move(record);
        any = true;
      } else {
        table.rows.push_back(std::move(record));
        table.line_numbers.push_back(record_line);
      }
    }
    record.clear();
    field_started = false;
  };
  char c;
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
    if (c == '"') {
      in_quotes = true;
      field_started = true;
    } else if (c == delim) {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r') {
    } else if (c == '\n') {
      end_record();
      ++line;
      record_line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw Error("schema_mismatch", "unterminated quoted field at line " +
                                                    std::to_string(record_line));
  if (field_started || !record.empty()) end_record();
  if (!table.header.empty() && table.header[0].size() >= 3 &&
      table.header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    table.header[0].erase(0, 3);
  return table;
}

inline Table read_file(const std::string& path, char delim = ',') {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path);
  return read(in, delim);
}

inline std::string escape(std::string_view field, char delim = ',') {
  bool needs = field.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields, char delim = ',') {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << delim;
    out << escape(fields[i], delim);
  }
  out << '\n';
}

inline void write(std::ostream& out, const Table& t, char delim = ',') {
  write_row(out, t.header, delim);
  for (const auto& r : t.rows) write_row(out, r, delim);
}

}  // namespace medsim::csv
