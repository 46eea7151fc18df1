#include "vrelax/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>

#include "vrelax/errors.hpp"

namespace vrelax::csv {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Table read(std::istream& in) {
  Table table;
  std::string line;
  int number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!have_header) {
      table.header = split(t, ',');
      table.header_line = number;
      have_header = true;
      continue;
    }
    table.rows.push_back({split(t, ','), number});
  }
  if (!have_header) throw ConfigError("CSV input has no header row");
  return table;
}

double parse_double(std::string_view field, int line) {
  const std::string s = trim(field);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("not a number: '" + s + "'", line);
  }
  if (!std::isfinite(v)) throw ConfigError("value must be finite: '" + s + "'", line);
  return v;
}

std::string format_double(double x) {
  if (x == 0.0) x = 0.0;  // fold -0 so output does not depend on summation order of zeros
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace vrelax::csv
