#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dmjc/error.hpp"
#include "dmjc/matrix.hpp"
#include "dmjc/metrics.hpp"

namespace dmjc {

/// Binary feature file layout (all little-endian):
///   "DMJC" | u16 version | u64 rows | u64 cols | rows*cols f32, row-major.
inline constexpr std::array<char, 4> kBinaryMagic{'D', 'M', 'J', 'C'};
inline constexpr std::uint16_t kBinaryVersion = 1;
inline constexpr std::size_t kBinaryHeaderBytes = 4 + 2 + 8 + 8;

namespace detail {

inline std::string path_str(const std::filesystem::path& p) { return p.string(); }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open '" + path_str(path) + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot open '" + path_str(tmp) + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Errc::io, "write failed for '" + path_str(tmp) + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Errc::io, "cannot move '" + path_str(tmp) + "' into place: " + ec.message());
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t end = line.find(',', pos);
    out.push_back(line.substr(pos, end == std::string_view::npos ? line.size() - pos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

template <typename T>
void put_le(std::string& buf, T value) {
  using U = std::make_unsigned_t<T>;
  U u;
  std::memcpy(&u, &value, sizeof(T));
  for (std::size_t b = 0; b < sizeof(T); ++b) buf.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
}

template <typename U>
U get_le(std::string_view bytes, std::size_t offset) {
  U u = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b)
    u |= static_cast<U>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  return u;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

/// Numeric CSV, comma-separated. A first row that does not parse as numbers
/// is taken as a header and skipped.
inline Matrix parse_csv_matrix(std::string_view text, const std::string& origin = "<memory>") {
  auto lines = detail::split_lines(text);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto fields = detail::split_fields(lines[ln]);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t c = 0; c < fields.size() && numeric; ++c)
      numeric = detail::parse_double(fields[c], row[c]);
    if (!numeric) {
      if (ln == 0) continue;
      fail(Errc::parse, origin + ": line " + std::to_string(ln + 1) + " is not numeric");
    }
    if (rows == 0) cols = row.size();
    if (row.size() != cols)
      fail(Errc::ragged_rows, origin + ": line " + std::to_string(ln + 1) + " has " +
                                  std::to_string(row.size()) + " fields, expected " +
                                  std::to_string(cols));
    for (std::size_t c = 0; c < row.size(); ++c)
      if (!std::isfinite(row[c]))
        fail(Errc::data_non_finite, origin + ": non-finite value at line " +
                                        std::to_string(ln + 1) + ", column " + std::to_string(c + 1));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  require(rows > 0, Errc::parse, origin + ": no data rows");
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.values().begin());
  return m;
}

inline std::string format_csv_matrix(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(',');
      out += detail::format_double(m(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

inline std::string encode_binary_matrix(const Matrix& m) {
  std::string buf(kBinaryMagic.begin(), kBinaryMagic.end());
  detail::put_le<std::uint16_t>(buf, kBinaryVersion);
  detail::put_le<std::uint64_t>(buf, m.rows());
  detail::put_le<std::uint64_t>(buf, m.cols());
  buf.reserve(buf.size() + 4 * m.size());
  for (double v : m.values()) detail::put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return buf;
}

inline Matrix decode_binary_matrix(std::string_view bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kBinaryMagic.data(), 4) != 0)
    fail(Errc::bad_magic, origin + ": missing DMJC magic bytes");
  require(bytes.size() >= kBinaryHeaderBytes, Errc::parse, origin + ": truncated header");
  const auto version = detail::get_le<std::uint16_t>(bytes, 4);
  require(version == kBinaryVersion, Errc::parse,
          origin + ": unsupported format version " + std::to_string(version));
  const auto rows = detail::get_le<std::uint64_t>(bytes, 6);
  const auto cols = detail::get_le<std::uint64_t>(bytes, 14);
  require(cols == 0 || rows <= (bytes.size() / 4) / cols, Errc::parse,
          origin + ": payload shorter than header claims");
  require(bytes.size() == kBinaryHeaderBytes + 4 * rows * cols, Errc::parse,
          origin + ": payload size does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const float f = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, kBinaryHeaderBytes + 4 * k));
    if (!std::isfinite(f))
      fail(Errc::data_non_finite, origin + ": non-finite value at row " + std::to_string(k / cols + 1) +
                                      ", column " + std::to_string(k % cols + 1));
    m.values()[k] = f;
  }
  return m;
}

inline void write_binary_matrix(const std::filesystem::path& path, const Matrix& m) {
  detail::write_file_atomic(path, encode_binary_matrix(m));
}

inline void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
  detail::write_file_atomic(path, format_csv_matrix(m));
}

/// Reads a feature matrix. Files named *.bin or *.dmjc, or starting with the
/// DMJC magic, are read as binary; anything else as CSV.
inline Matrix load_feature_matrix(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const auto ext = path.extension().string();
  const bool binary = ext == ".bin" || ext == ".dmjc" ||
                      (bytes.size() >= 4 && std::memcmp(bytes.data(), kBinaryMagic.data(), 4) == 0);
  return binary ? decode_binary_matrix(bytes, path.string()) : parse_csv_matrix(bytes, path.string());
}

/// One non-negative integer label per line; an optional non-numeric header.
inline std::vector<Label> parse_labels(std::string_view text, const std::string& origin = "<memory>") {
  auto lines = detail::split_lines(text);
  std::vector<Label> labels;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto s = detail::trim(lines[ln]);
    Label v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      if (ln == 0) continue;
      fail(Errc::parse, origin + ": line " + std::to_string(ln + 1) + " is not a label");
    }
    labels.push_back(v);
  }
  require(!labels.empty(), Errc::parse, origin + ": no labels");
  return labels;
}

inline std::vector<Label> load_labels(const std::filesystem::path& path) {
  return parse_labels(detail::read_file(path), path.string());
}

inline std::string format_labels(std::span<const Label> labels) {
  std::string out = "label\n";
  for (auto l : labels) out += std::to_string(l) + "\n";
  return out;
}

inline void write_labels(const std::filesystem::path& path, std::span<const Label> labels) {
  detail::write_file_atomic(path, format_labels(labels));
}

}  // namespace dmjc
