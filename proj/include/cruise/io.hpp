#pragma once

/// CSV time-series output and input. Numbers are written with 17
/// significant digits so a record survives a round trip bit-exactly.

#include "cruise/monitor.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cruise {

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const RecordLayout& layout) : out_(out), width_(layout.width()) {
    const auto names = layout.column_names();
    for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
    out_ << '\n';
  }

  void write(std::span<const double> row) {
    if (row.size() != width_) throw std::invalid_argument("csv: row width mismatch");
    line_.clear();
    char buf[32];
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line_.push_back(',');
      auto res = std::to_chars(buf, buf + sizeof buf, row[i], std::chars_format::general, 17);
      line_.append(buf, res.ptr);
    }
    line_.push_back('\n');
    out_ << line_;
  }

 private:
  std::ostream& out_;
  std::size_t width_;
  std::string line_;
};

inline void write_csv(std::ostream& out, const SimulationRecord& record) {
  CsvWriter w(out, record.layout);
  for (std::size_t k = 0; k < record.rows(); ++k) w.write(record.row(k));
}

inline SimulationRecord read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  std::vector<std::string> names;
  for (std::size_t start = 0;;) {
    const std::size_t comma = line.find(',', start);
    names.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  SimulationRecord rec;
  rec.layout = RecordLayout::from_column_names(names);
  const std::size_t width = rec.layout.width();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    std::size_t fields = 0;
    while (p <= end) {
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc())
        throw std::runtime_error("csv: bad number on line " + std::to_string(lineno));
      rec.data.push_back(v);
      ++fields;
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw std::runtime_error("csv: bad separator on line " + std::to_string(lineno));
      ++p;
    }
    if (fields != width)
      throw std::runtime_error("csv: line " + std::to_string(lineno) + " has " +
                               std::to_string(fields) + " fields, expected " +
                               std::to_string(width));
  }
  return rec;
}

inline SimulationRecord read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace cruise
