#pragma once

// Minimal strict CSV reader/writer: ',' delimiter, '.' decimal, '#' comment
// lines, no quoting (none of the tables here carry text with commas).

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vrelax::csv {

struct Row {
  std::vector<std::string> fields;
  int line = 0;
};

struct Table {
  std::vector<std::string> header;
  int header_line = 0;
  std::vector<Row> rows;
};

/// Reads a header row followed by data rows. Blank and '#' lines are skipped;
/// fields are whitespace-trimmed. A missing header is a ConfigError.
Table read(std::istream& in);

/// Strict finite double: the whole field must parse, NaN and infinities are rejected.
double parse_double(std::string_view field, int line);

/// Shortest text that round-trips through parse_double ("%.17g").
std::string format_double(double x);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

}  // namespace vrelax::csv
