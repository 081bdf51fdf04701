#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "icl/errors.hpp"

namespace icl {

inline constexpr int kCsvSchemaVersion = 1;

/// Shortest round-trip-safe text for a double (17 significant digits).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One CSV cell: numbers are rendered with fmt_double, strings verbatim.
class CsvCell {
 public:
  CsvCell(double v) : text_(fmt_double(v)) {}
  CsvCell(int v) : text_(std::to_string(v)) {}
  CsvCell(long v) : text_(std::to_string(v)) {}
  CsvCell(long long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long long v) : text_(std::to_string(v)) {}
  CsvCell(bool v) : text_(v ? "1" : "0") {}
  CsvCell(const char* s) : text_(s) {}
  CsvCell(std::string s) : text_(std::move(s)) {}
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// In-memory CSV table. The first emitted line is a schema comment
/// "# iclab-csv v<version> <kind>" followed by the header row.
class CsvTable {
 public:
  CsvTable(std::string kind, std::vector<std::string> columns)
      : kind_(std::move(kind)), columns_(std::move(columns)) {}

  void add(std::initializer_list<CsvCell> cells) {
    if (cells.size() != columns_.size())
      throw InvalidInput("csv '" + kind_ + "': row has " + std::to_string(cells.size()) +
                         " cells, expected " + std::to_string(columns_.size()));
    std::vector<std::string> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(c.text());
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  const std::string& kind() const { return kind_; }

  std::string str() const {
    std::string out = "# iclab-csv v" + std::to_string(kCsvSchemaVersion) + " " + kind_ + "\n";
    append_row(out, columns_);
    for (const auto& r : rows_) append_row(out, r);
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot open '" + path + "' for writing");
    f << str();
  }

 private:
  static void append_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }

  std::string kind_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace icl
