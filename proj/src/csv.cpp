#include "lqt/csv.hpp"

#include <cstdio>
#include <fstream>

#include "lqt/common.hpp"

namespace lqt::csv {

std::string format(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Row& Row::operator<<(double v) {
  cells_.push_back(format(v));
  return *this;
}

Row& Row::operator<<(int v) {
  cells_.push_back(std::to_string(v));
  return *this;
}

Row& Row::operator<<(long v) {
  cells_.push_back(std::to_string(v));
  return *this;
}

Row& Row::operator<<(std::string_view v) {
  cells_.emplace_back(v);
  return *this;
}

Row& Row::operator<<(bool v) {
  cells_.emplace_back(v ? "true" : "false");
  return *this;
}

void write_header(std::ostream& os, std::initializer_list<std::string_view> columns) {
  bool first = true;
  for (auto c : columns) {
    if (!first) os << ',';
    os << c;
    first = false;
  }
  os << '\n';
}

void write_row(std::ostream& os, const Row& row) {
  bool first = true;
  for (const auto& c : row.cells()) {
    if (!first) os << ',';
    os << c;
    first = false;
  }
  os << '\n';
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open output file " + path.string());
  out << contents;
  if (!out) throw InputError("failed writing output file " + path.string());
}

}  // namespace lqt::csv
