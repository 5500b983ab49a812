#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace commlab {

/// Canonical float rendering: 12 significant digits, shortest-form exponent.
/// Every artifact goes through this so re-runs are byte-identical.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

using CsvValue = std::variant<std::int64_t, double, std::string>;

inline std::string to_csv_field(const CsvValue& v) {
  if (std::holds_alternative<std::int64_t>(v))
    return std::to_string(std::get<std::int64_t>(v));
  if (std::holds_alternative<double>(v)) return format_double(std::get<double>(v));
  return std::get<std::string>(v);
}

/// Writes comment lines (prefixed '#'), a header row, then value rows.
/// Callers emit rows in key order; nothing here reorders.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& comments,
            const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    for (const std::string& c : comments) out_ << "# " << c << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ",";
      out_ << columns[i];
    }
    out_ << "\n";
  }

  void row(const std::vector<CsvValue>& values) {
    if (values.size() != columns_)
      throw std::invalid_argument("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ",";
      out_ << to_csv_field(values[i]);
    }
    out_ << "\n";
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace commlab
