#pragma once

// Trace persistence: one CSV per solver run with the fixed column set
//   iteration,rel_error,wl_size,bl_size,wl_corruption_frac,q_current,wall_time_ns
// Floats use %.17g so parsing the file back reproduces the doubles exactly;
// optional fields (absent without a ground-truth oracle) are empty cells.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "kaczmarz/csv.hpp"
#include "kaczmarz/errors.hpp"
#include "kaczmarz/solvers.hpp"

namespace kaczmarz {

inline constexpr const char* kTraceHeader =
    "iteration,rel_error,wl_size,bl_size,wl_corruption_frac,q_current,"
    "wall_time_ns";

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : std::string();
}

// Exact unsigned parse (wall times can exceed the 2^53 double mantissa).
inline std::uint64_t parse_csv_u64(const std::string& field,
                                   std::size_t line_no) {
  const std::size_t first = field.find_first_not_of(" \t");
  if (first == std::string::npos)
    throw ParseError(line_no, "expected a nonnegative integer, got ''");
  const std::size_t last = field.find_last_not_of(" \t");
  const char* begin = field.data() + first;
  const char* end = field.data() + last + 1;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw ParseError(line_no, "expected a nonnegative integer, got '" +
                                  field + "'");
  return value;
}

}  // namespace detail

inline void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << kTraceHeader << '\n';
  for (const TracePoint& p : trace.points) {
    out << p.iteration << ',' << detail::format_optional(p.rel_error) << ','
        << p.wl_size << ',' << p.bl_size << ','
        << detail::format_optional(p.wl_corruption_frac) << ','
        << detail::format_double(p.q_current) << ',' << p.wall_time_ns
        << '\n';
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

inline std::vector<TracePoint> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw EmptyFile(path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader)
    throw ParseError(1, "unexpected trace header '" + line + "'");

  std::vector<TracePoint> points;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 7)
      throw ParseError(line_no, "expected 7 fields, got " +
                                    std::to_string(cells.size()));
    TracePoint p;
    p.iteration =
        static_cast<std::size_t>(detail::parse_csv_u64(cells[0], line_no));
    if (!cells[1].empty())
      p.rel_error = detail::parse_csv_field(cells[1], line_no);
    p.wl_size =
        static_cast<std::size_t>(detail::parse_csv_u64(cells[2], line_no));
    p.bl_size =
        static_cast<std::size_t>(detail::parse_csv_u64(cells[3], line_no));
    if (!cells[4].empty())
      p.wl_corruption_frac = detail::parse_csv_field(cells[4], line_no);
    p.q_current = detail::parse_csv_field(cells[5], line_no);
    p.wall_time_ns = detail::parse_csv_u64(cells[6], line_no);
    points.push_back(p);
  }
  return points;
}

}  // namespace kaczmarz
