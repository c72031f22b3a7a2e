#pragma once

// CSV I/O and number formatting. One dialect everywhere: comma separator,
// '.' decimal point, UTF-8, header row, no quoting (identifiers are
// restricted to [A-Za-z0-9_] so quoting is never needed). Doubles are
// written with shortest-round-trip formatting so files parse back to the
// exact same bits.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lgm/errors.hpp"

namespace lgm {

inline std::string fmt_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string fmt_int(std::int64_t x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double x = 0.0;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw MissingValue("cannot parse number '" + std::string(s) + "' (" + context + ")");
  return x;
}

inline std::int64_t parse_int(std::string_view s, const std::string& context) {
  std::int64_t x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw MissingValue("cannot parse integer '" + std::string(s) + "' (" + context + ")");
  return x;
}

inline bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                    (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_view(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFitArtifact("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

// Parsed tabular records: cells are views into the owned buffer.
struct RawTable {
  std::string buffer;
  std::vector<std::string> columns;
  std::vector<std::string_view> cells;  // row-major, columns.size() per row
  std::size_t rows = 0;

  std::string_view at(std::size_t row, std::size_t col) const {
    return cells[row * columns.size() + col];
  }
  int column_index(std::string_view name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return static_cast<int>(c);
    return -1;
  }
};

inline RawTable read_csv(const std::string& path) {
  RawTable table;
  table.buffer = read_file(path);
  std::string_view rest = table.buffer;
  auto next_line = [&rest]() -> std::string_view {
    if (rest.empty()) return {};
    std::size_t eol = rest.find('\n');
    std::string_view line = eol == std::string_view::npos ? rest : rest.substr(0, eol);
    rest = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  std::string_view header = next_line();
  if (header.empty()) throw EmptyDataset("empty file: " + path);
  for (auto col : split_view(header, ',')) table.columns.emplace_back(col);

  const std::size_t ncol = table.columns.size();
  while (!rest.empty()) {
    std::string_view line = next_line();
    if (line.empty()) continue;
    auto fields = split_view(line, ',');
    if (fields.size() != ncol)
      throw MissingValue("row " + fmt_int(static_cast<std::int64_t>(table.rows + 2)) +
                         " of " + path + " has " + fmt_int((std::int64_t)fields.size()) +
                         " fields, expected " + fmt_int((std::int64_t)ncol));
    for (auto f : fields) table.cells.push_back(f);
    ++table.rows;
  }
  return table;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : ncol_(columns.size()) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ += ',';
      out_ += columns[i];
    }
    out_ += '\n';
  }

  void cell(std::string_view v) {
    if (col_) out_ += ',';
    out_.append(v.data(), v.size());
    ++col_;
  }
  void cell(double v) { cell(std::string_view(fmt_double(v))); }
  void cell(std::int64_t v) { cell(std::string_view(fmt_int(v))); }
  void cell(int v) { cell(static_cast<std::int64_t>(v)); }

  void end_row() {
    if (col_ != ncol_) throw Error("csv row has wrong number of cells");
    out_ += '\n';
    col_ = 0;
  }

  const std::string& str() const { return out_; }
  void save(const std::string& path) const { write_file(path, out_); }

 private:
  std::string out_;
  std::size_t ncol_;
  std::size_t col_ = 0;
};

}  // namespace lgm
