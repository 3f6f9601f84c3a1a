#include "qlsr/csv.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qlsr/errors.hpp"

namespace qlsr::csv {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int Table::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  return -1;
}

const std::vector<double>& Table::column(const std::string& name) const {
  int j = column_index(name);
  if (j < 0) throw ParseError("csv: no column named '" + name + "'");
  return columns[static_cast<std::size_t>(j)];
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  out.push_back(cell);
  return out;
}

}  // namespace

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("csv: missing header row");
  }
  t.header = split_line(line);
  if (t.header.empty() || t.header[0].empty()) {
    throw ParseError("csv: empty header");
  }
  t.columns.assign(t.header.size(), {});
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw ParseError("csv: row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(t.header.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (cells[j].empty()) {
        throw ParseError("csv: empty cell at row " + std::to_string(row) +
                         ", column '" + t.header[j] + "'");
      }
      char* end = nullptr;
      double v = std::strtod(cells[j].c_str(), &end);
      if (end == cells[j].c_str() || *end != '\0') {
        throw ParseError("csv: non-numeric cell '" + cells[j] + "' at row " +
                         std::to_string(row) + ", column '" + t.header[j] +
                         "'");
      }
      t.columns[j].push_back(v);
    }
  }
  return t;
}

Table read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open '" + path + "'");
  return read_table(in);
}

void write_table(std::ostream& out, const Table& table) {
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j) out << ',';
    out << table.header[j];
  }
  out << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.cols(); ++j) {
      if (j) out << ',';
      out << format_double(table.columns[j][i]);
    }
    out << '\n';
  }
}

void write_table_file(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw ParseError("csv: cannot open '" + path + "' for writing");
  write_table(out, table);
}

}  // namespace qlsr::csv
