#include <pendyn/csv.hpp>

#include <pendyn/core.hpp>

#include <cmath>
#include <cstdio>

namespace pendyn {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& cell, char delim) {
  if (cell.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

TableWriter::TableWriter(const std::filesystem::path& path, const std::vector<std::string>& header, char delim)
    : out_(path, std::ios::binary), path_(path), columns_(header.size()), delim_(delim) {
  if (!out_) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path.string() + " for writing");
  text_row(header);
}

void TableWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) {
    throw Error(ErrorCode::kDimensionMismatch, path_.string() + ": row has " + std::to_string(values.size()) +
                                                   " values, header has " + std::to_string(columns_));
  }
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNonFinite, path_.string() + ": non-finite value in column " + std::to_string(i));
    }
    if (i) line += delim_;
    line += format_double(values[i]);
  }
  line += '\n';
  out_ << line;
}

void TableWriter::text_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += delim_;
    line += csv_escape(cells[i], delim_);
  }
  line += '\n';
  out_ << line;
  if (!out_) throw Error(ErrorCode::kInvalidArgument, "write failed: " + path_.string());
}

}  // namespace pendyn
