#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "draftfe/common.hpp"

namespace draftfe::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // raw cells, unquoted CSV

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    throw data_error("csv: missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Table read_file(const std::string& path,
                       const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw data_error("csv: cannot open file '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw data_error("csv: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  if (!expected_header.empty() && t.header != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw data_error("csv: schema mismatch in '" + path + "', expected header '" +
                     want + "', got '" + line + "'");
  }
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw data_error("csv: row " + std::to_string(lineno) + " in '" + path +
                       "' has " + std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// Empty cell means missing.
inline std::optional<long long> parse_int(const std::string& cell, const std::string& what,
                                          size_t row) {
  if (cell.empty()) return std::nullopt;
  long long v = 0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || p != cell.data() + cell.size())
    throw data_error("csv: row " + std::to_string(row) + ": bad integer '" + cell +
                     "' for " + what);
  return v;
}

inline std::optional<double> parse_double(const std::string& cell, const std::string& what,
                                          size_t row) {
  if (cell.empty()) return std::nullopt;
  try {
    size_t pos = 0;
    double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw data_error("csv: row " + std::to_string(row) + ": bad number '" + cell +
                     "' for " + what);
  }
}

}  // namespace draftfe::csv
