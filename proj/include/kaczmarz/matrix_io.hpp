#pragma once

// Problem-file persistence.
//
// Matrix binary format (extension-agnostic, detected by magic):
//   bytes 0..3   magic "KZMX"
//   bytes 4..7   format version, u32 little-endian (currently 1)
//   bytes 8..15  row count m, u64 little-endian
//   bytes 16..23 column count n, u64 little-endian
//   then m*n IEEE-754 doubles, row-major, little-endian.
// Byte order is explicit in the encoder/decoder, so files are portable.
//
// CSV fallback: read_matrix() falls back to a comma-separated numeric grid
// when the magic is absent. Vectors (labels, truth) are one value per line;
// index sets (corruption support) one index per line.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "kaczmarz/csv.hpp"
#include "kaczmarz/errors.hpp"
#include "kaczmarz/linalg.hpp"

namespace kaczmarz {

inline constexpr char kMatrixMagic[4] = {'K', 'Z', 'M', 'X'};
inline constexpr std::uint32_t kMatrixVersion = 1;

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>(v >> (8 * b)));
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>(v >> (8 * b)));
}

inline void put_f64_le(std::string& out, double v) {
  put_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace detail

// FNV-1a, 64-bit: the manifest checksum for generated problem files.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t file_checksum(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  return fnv1a64(bytes.data(), bytes.size());
}

inline void write_matrix(const std::string& path, const RowMatrix& a) {
  std::string out;
  out.reserve(24 + a.data.size() * 8);
  out.append(kMatrixMagic, 4);
  detail::put_u32_le(out, kMatrixVersion);
  detail::put_u64_le(out, a.rows);
  detail::put_u64_le(out, a.cols);
  for (double v : a.data) detail::put_f64_le(out, v);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to '" + path + "'");
}

inline RowMatrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  RowMatrix a;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (a.cols == 0)
      a.cols = cells.size();
    else if (cells.size() != a.cols)
      throw ParseError(line_no, "expected " + std::to_string(a.cols) +
                                    " fields, got " +
                                    std::to_string(cells.size()));
    for (const std::string& cell : cells)
      a.data.push_back(detail::parse_csv_field(cell, line_no));
    ++a.rows;
  }
  if (a.rows == 0) throw EmptyFile(path);
  return a;
}

inline RowMatrix read_matrix(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || std::string(bytes.data(), 4) !=
                              std::string(kMatrixMagic, 4))
    return read_matrix_csv(path);  // CSV fallback
  if (bytes.size() < 24) throw IoError("'" + path + "' is truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = detail::get_u32_le(p + 4);
  if (version != kMatrixVersion)
    throw IoError("'" + path + "' has unsupported format version " +
                  std::to_string(version));
  RowMatrix a;
  a.rows = static_cast<std::size_t>(detail::get_u64_le(p + 8));
  a.cols = static_cast<std::size_t>(detail::get_u64_le(p + 16));
  const std::size_t need = 24 + a.rows * a.cols * 8;
  if (bytes.size() != need)
    throw IoError("'" + path + "' has " + std::to_string(bytes.size()) +
                  " bytes, expected " + std::to_string(need));
  a.data.resize(a.rows * a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    a.data[i] = std::bit_cast<double>(detail::get_u64_le(p + 24 + 8 * i));
  return a;
}

inline void write_vector_csv(const std::string& path,
                             const std::vector<double>& v) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << buf << '\n';
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

inline std::vector<double> read_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<double> v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    v.push_back(detail::parse_csv_field(line, line_no));
  }
  if (v.empty()) throw EmptyFile(path);
  return v;
}

inline void write_index_csv(const std::string& path,
                            const std::vector<std::size_t>& idx) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (std::size_t i : idx) out << i << '\n';
  if (!out) throw IoError("short write to '" + path + "'");
}

inline std::vector<std::size_t> read_index_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::size_t> idx;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const double v = detail::parse_csv_field(line, line_no);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ParseError(line_no, "expected a nonnegative index");
    idx.push_back(static_cast<std::size_t>(v));
  }
  return idx;
}

}  // namespace kaczmarz
