#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stackopt/core.hpp"

namespace stackopt {

/// Malformed input file; the message carries the 1-based line number.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

/// Comma-separated file with a header row. Cells are kept as text until a
/// caller asks for specific numeric columns.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // source line of each row

  static CsvTable read(const std::filesystem::path& path, char delimiter = ',');
  static CsvTable parse(const std::string& text, char delimiter = ',');

  /// Column by header name, or by 0-based index when spec is all digits and
  /// no header matches. Throws listing the available columns.
  std::size_t column(const std::string& spec) const;

  /// The listed columns as doubles; any non-numeric cell is an error naming
  /// its line and column.
  Matrix numeric(std::span<const std::size_t> cols) const;
};

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

/// Tab-separated output with a header row.
void write_tsv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& values);

}  // namespace stackopt
