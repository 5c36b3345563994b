#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace eafrs {

using CsvRow = std::vector<std::string>;

/// Splits one line; double quotes group fields and "" escapes a quote.
CsvRow parse_csv_line(const std::string& line);
std::string format_csv_line(const CsvRow& fields);

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;

  /// Column index by name; throws DataError when absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);
std::string render_csv(const CsvTable& table);

/// Shortest text that parses back to the same double; "inf" for +infinity.
std::string format_double(double v);
double parse_double(const std::string& text);

/// Fixed two-decimal rendering used by reports; never prints "-0.00".
std::string format_fixed2(double v);

}  // namespace eafrs
