#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace msb::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1.
  int column(const std::string& name) const;
};

/// Parses comma-separated text with a header row. Double-quoted fields may
/// contain commas and escaped quotes. Throws DataError on ragged rows.
Table parse(std::istream& in);
Table read_file(const std::string& path);

std::string escape(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Fixed 6-decimal formatting used by every emitted CSV.
std::string fmt(double v);

/// Shortest text that parses back to exactly v; "NA" for missing.
std::string exact(double v);

}  // namespace msb::csv
