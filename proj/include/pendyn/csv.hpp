#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace pendyn {

/// "%.17g"
std::string format_double(double v);

/// Quotes a cell when it contains the delimiter, a quote or a line break.
std::string csv_escape(const std::string& cell, char delim = ',');

/// Header-first delimited table. Numeric rows must be finite (kNonFinite).
class TableWriter {
 public:
  TableWriter(const std::filesystem::path& path, const std::vector<std::string>& header, char delim = ',');

  void row(const std::vector<double>& values);
  void text_row(const std::vector<std::string>& cells);
  std::size_t columns() const noexcept { return columns_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
  char delim_;
};

}  // namespace pendyn
