#pragma once

// Small shared CSV helpers: strict numeric field parsing and line splitting.

#include <charconv>
#include <string>
#include <vector>

#include "kaczmarz/errors.hpp"

namespace kaczmarz::detail {

// Parses one numeric cell, tolerating surrounding spaces/tabs only.
inline double parse_csv_field(const std::string& field, std::size_t line_no) {
  const std::size_t first = field.find_first_not_of(" \t");
  if (first == std::string::npos) throw NonNumericField(line_no, field);
  const std::size_t last = field.find_last_not_of(" \t");
  const char* begin = field.data() + first;
  const char* end = field.data() + last + 1;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) throw NonNumericField(line_no, field);
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    cells.push_back(line.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return cells;
}

}  // namespace kaczmarz::detail
