#ifndef QLSR_CSV_HPP
#define QLSR_CSV_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace qlsr::csv {

// Round-trip-safe decimal formatting (17 significant digits).
std::string format_double(double v);

// Rectangular numeric table with a header row. Columns are stored
// column-major; rows are dense (missing cells are a parse error).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns[0].size(); }
  std::size_t cols() const { return columns.size(); }
  int column_index(const std::string& name) const;  // -1 when absent
  const std::vector<double>& column(const std::string& name) const;
};

Table read_table(std::istream& in);
Table read_table_file(const std::string& path);
void write_table(std::ostream& out, const Table& table);
void write_table_file(const std::string& path, const Table& table);

}  // namespace qlsr::csv

#endif
